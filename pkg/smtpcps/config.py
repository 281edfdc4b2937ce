# -----------------------------------------------------------------------------
# MIT License
#
# Copyright (c) 2024 SMTP-CPS Team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
# -----------------------------------------------------------------------------

"""Run configuration files.

A run configuration is an INI file; the key ``model.A`` is written as ``A = ...`` under ``[model]``. Every key is
optional and falls back to the reference instance. Example::

    [model]
    A = 1 0.0975 0 0.9512
    B = 0.0246 0.4877
    Ts = 0.1

    [dist]
    true_bound = 0.1
    controller_bound = 0.12
    alpha = 4

    [sweep]
    alphas = 1.5 2 3 4 5 6 7 8
"""
import configparser
import logging
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .controller import CostId, TerminalGain
from .dynamics import LinearModel, UncertainModel, check_model_chain
from .errors import ConfigError, ContractViolation
from .geometry import Polytope, Tolerance
from .utils.static_funcs import parse_bits

logger = logging.getLogger(__name__)

_RANDOM_MESSAGE = re.compile(r'^random:(\d+)$')
_SECTION = re.compile(r'^\s*\[([^\]]+)\]')
_KEY = re.compile(r'^\s*([^=:#;\s][^=:]*?)\s*[=:]')


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration with the reference-instance defaults."""
    A: Tuple[float, ...] = (1.0, 0.0975, 0.0, 0.9512)
    B: Tuple[float, ...] = (0.0246, 0.4877)
    Ts: float = 0.1
    true_bound: float = 0.1
    controller_bound: float = 0.12
    alpha: float = 4.0
    K: Tuple[float, ...] = (-13.27, -2.26)
    N: int = 250
    u_max: float = 6.0
    alpha_max: float = 0.05
    bit_costs: Tuple[str, str] = ('min_distance', 'min_effort')
    steps: int = 50
    reps: int = 20
    base_seed: int = 0
    message: str = 'random:64'
    x0: Optional[Tuple[float, ...]] = None
    trace: bool = False
    geom_eps: float = 1e-9
    cert_eps: float = 1e-7
    alphas: Tuple[float, ...] = (1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    jobs: int = 1

    # ----------------------------------------------------------- derived objects
    @property
    def n(self) -> int:
        return int(round(np.sqrt(len(self.A))))

    def linear_model(self) -> LinearModel:
        n = self.n
        return LinearModel(np.reshape(self.A, (n, n)), np.reshape(self.B, (n, -1)), self.Ts)

    def tolerance(self) -> Tolerance:
        return Tolerance(geom_eps=self.geom_eps, cert_eps=self.cert_eps)

    def d_true(self) -> Polytope:
        return Polytope.symmetric_box(self.true_bound, self.n)

    def d_c(self) -> Polytope:
        return Polytope.symmetric_box(self.controller_bound, self.n)

    def d_e(self, alpha: Optional[float] = None) -> Polytope:
        return self.d_c().scale(self.alpha if alpha is None else alpha)

    def controller_model(self) -> UncertainModel:
        return UncertainModel(self.linear_model(), self.d_c())

    def gain(self) -> TerminalGain:
        return TerminalGain(np.reshape(self.K, (1, -1)))

    def input_set(self) -> Polytope:
        return Polytope.interval(-self.u_max, self.u_max)

    def costs(self) -> Tuple[CostId, CostId]:
        return CostId(self.bit_costs[0]), CostId(self.bit_costs[1])

    def message_spec(self) -> Tuple[Optional[Tuple[int, ...]], int]:
        """``(bits, length)``; ``bits`` is None for a ``random:<len>`` message."""
        m = _RANDOM_MESSAGE.match(self.message)
        if m:
            return None, int(m.group(1))
        bits = tuple(parse_bits(self.message))
        return bits, len(bits)

    def initial_states(self) -> Optional[List[np.ndarray]]:
        if self.x0 is None:
            return None
        return [np.array(v) for v in np.reshape(self.x0, (-1, self.n))]

    def with_overrides(self, seed: Optional[int] = None, jobs: Optional[int] = None,
                       trace: Optional[bool] = None) -> 'RunConfig':
        """Apply command line overrides; ``None`` keeps the file value."""
        changes = {k: v for k, v in (('base_seed', seed), ('jobs', jobs), ('trace', trace)) if v is not None}
        return validate(replace(self, **changes)) if changes else self


def default_config() -> RunConfig:
    return RunConfig()


# (section, key) -> (field, kind, count); count None means any number of values
_SCHEMA: Dict[Tuple[str, str], Tuple[str, str, Optional[int]]] = {
    ('model', 'a'): ('A', 'floats', 4),
    ('model', 'b'): ('B', 'floats', 2),
    ('model', 'ts'): ('Ts', 'float', None),
    ('dist', 'true_bound'): ('true_bound', 'float', None),
    ('dist', 'controller_bound'): ('controller_bound', 'float', None),
    ('dist', 'alpha'): ('alpha', 'float', None),
    ('controller', 'k'): ('K', 'floats', 2),
    ('controller', 'n'): ('N', 'int', None),
    ('controller', 'u_max'): ('u_max', 'float', None),
    ('controller', 'alpha_max'): ('alpha_max', 'float', None),
    ('controller', 'bit_costs'): ('bit_costs', 'words', 2),
    ('sim', 'steps'): ('steps', 'int', None),
    ('sim', 'reps'): ('reps', 'int', None),
    ('sim', 'base_seed'): ('base_seed', 'int', None),
    ('sim', 'message'): ('message', 'str', None),
    ('sim', 'x0'): ('x0', 'floats', None),
    ('sim', 'trace'): ('trace', 'bool', None),
    ('tol', 'geom_eps'): ('geom_eps', 'float', None),
    ('tol', 'cert_eps'): ('cert_eps', 'float', None),
    ('sweep', 'alphas'): ('alphas', 'floats', None),
    ('sweep', 'jobs'): ('jobs', 'int', None),
}

_FIELD_KEYS = {f: f'{s}.{k}' for (s, k), (f, _, _) in _SCHEMA.items()}


def _line_map(text: str) -> Dict[Tuple[str, Optional[str]], int]:
    lines: Dict[Tuple[str, Optional[str]], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        sec = _SECTION.match(line)
        if sec:
            section = sec.group(1).strip().lower()
            lines.setdefault((section, None), no)
            continue
        key = _KEY.match(line)
        if key and section is not None and not line[:1].isspace():
            lines[(section, key.group(1).strip().lower())] = no
    return lines


def _convert(raw: str, kind: str, count: Optional[int]):
    if kind == 'str':
        return raw.strip()
    if kind == 'bool':
        value = raw.strip().lower()
        if value not in configparser.ConfigParser.BOOLEAN_STATES:
            raise ValueError(f'not a boolean: {raw!r}')
        return configparser.ConfigParser.BOOLEAN_STATES[value]
    items = raw.replace(',', ' ').split()
    if kind == 'int':
        if len(items) != 1:
            raise ValueError(f'expected one integer, got {raw!r}')
        return int(items[0])
    if kind == 'float':
        if len(items) != 1:
            raise ValueError(f'expected one number, got {raw!r}')
        return float(items[0])
    if count is not None and len(items) != count:
        raise ValueError(f'expected {count} values, got {len(items)}')
    if kind == 'words':
        return tuple(items)
    return tuple(float(v) for v in items)


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    """Parse the text of a run configuration and validate it.

    Raises:
        ConfigError: Syntax error, unknown key, malformed value or failed validation; carries the line number
            where one applies.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=path or '<config>')
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError('key outside of any section', line=e.lineno, path=path) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError(f'cannot parse line: {e.errors[0][1] if e.errors else e}', line=line, path=path) from e
    except configparser.Error as e:
        raise ConfigError(str(e), line=getattr(e, 'lineno', None), path=path) from e
    lines = _line_map(text)
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section, raw=True):
            spec = _SCHEMA.get((section.lower(), key))
            line = lines.get((section.lower(), key), lines.get((section.lower(), None)))
            if spec is None:
                raise ConfigError(f'unknown key {section}.{key}', line=line, path=path)
            name, kind, count = spec
            try:
                values[name] = _convert(raw, kind, count)
            except ValueError as e:
                raise ConfigError(f'{section}.{key}: {e}', line=line, path=path) from e
    cfg = RunConfig(**values)
    try:
        return validate(cfg)
    except ConfigError as e:
        if e.key is not None and e.line is None:
            section, key = _FIELD_KEYS[e.key].split('.')
            raise ConfigError(e.reason, line=lines.get((section, key)), path=path, key=e.key) from e
        raise


def load_config(path: Optional[str] = None) -> RunConfig:
    """Read a configuration file; ``None`` gives the defaults."""
    if path is None:
        return default_config()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'cannot read configuration: {e}', path=path) from e
    cfg = parse_config(text, path)
    logger.debug('Loaded configuration from %s', path)
    return cfg


def _fail(field_name: str, reason: str):
    raise ConfigError(f'{_FIELD_KEYS.get(field_name, field_name)}: {reason}', key=field_name)


def validate(cfg: RunConfig) -> RunConfig:
    """Fail fast on an inconsistent configuration.

    Raises:
        ConfigError: With the offending key in the message.
    """
    n = cfg.n
    if n * n != len(cfg.A):
        _fail('A', f'{len(cfg.A)} entries do not form a square matrix')
    if len(cfg.B) % n:
        _fail('B', f'{len(cfg.B)} entries do not fit a {n}-state model')
    if len(cfg.B) // n != 1:
        _fail('B', 'only single-input models are supported')
    if len(cfg.K) != n:
        _fail('K', f'expected {n} gain entries')
    if not cfg.Ts > 0:
        _fail('Ts', 'sampling period must be positive')
    if not cfg.true_bound >= 0:
        _fail('true_bound', 'must be non-negative')
    if not cfg.true_bound < cfg.controller_bound:
        _fail('true_bound', f'true disturbance bound {cfg.true_bound} must be strictly smaller than the '
                            f'controller bound {cfg.controller_bound}')
    if not cfg.alpha >= 1:
        _fail('alpha', f'eavesdropper scale must be at least 1, got {cfg.alpha}')
    if cfg.N < 1:
        _fail('N', 'must be at least 1')
    if not cfg.u_max > 0:
        _fail('u_max', 'must be positive')
    if not 0 < cfg.alpha_max < 1:
        _fail('alpha_max', 'must lie in (0, 1)')
    for cost in cfg.bit_costs:
        if cost not in {c.value for c in CostId}:
            _fail('bit_costs', f'unknown cost {cost!r}')
    if cfg.steps < 1:
        _fail('steps', 'must be at least 1')
    if cfg.reps < 1:
        _fail('reps', 'must be at least 1')
    if not 0 <= cfg.base_seed < 2 ** 64:
        _fail('base_seed', 'must be an unsigned 64-bit integer')
    if not _RANDOM_MESSAGE.match(cfg.message):
        try:
            parse_bits(cfg.message)
        except ValueError:
            _fail('message', 'expected a bit string or random:<len>')
    if cfg.x0 is not None and (len(cfg.x0) == 0 or len(cfg.x0) % n):
        _fail('x0', f'expected a multiple of {n} values')
    if not cfg.geom_eps > 0:
        _fail('geom_eps', 'must be positive')
    if not cfg.cert_eps > 0:
        _fail('cert_eps', 'must be positive')
    if not cfg.alphas:
        _fail('alphas', 'the sweep needs at least one value')
    if any(not a > 1 for a in cfg.alphas):
        _fail('alphas', 'all sweep values must be greater than 1')
    if cfg.jobs < 1:
        _fail('jobs', 'must be at least 1')
    try:
        check_model_chain(cfg.d_true(), cfg.d_c(), cfg.d_e(), strict=False)
    except ContractViolation as e:
        _fail('true_bound', str(e))
    return cfg
