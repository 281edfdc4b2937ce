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

"""Exceptions raised by the set computations, the controller and the protocol."""


class SMTPCPSError(Exception):
    """Base class of every error raised by this package."""


class ContractViolation(SMTPCPSError, ValueError):
    """An argument violates the documented precondition of an operation."""


class EmptySetError(SMTPCPSError, ValueError):
    """An operation that needs a non-empty polytope received an empty one."""


class UnboundedSetError(SMTPCPSError, ValueError):
    """A halfspace system does not describe a bounded set."""


class UnsupportedError(SMTPCPSError, NotImplementedError):
    """The request is outside what the implementation supports (dimension, set shape, input count)."""


class NonContractiveError(SMTPCPSError, RuntimeError):
    """The invariant-set iteration did not reach the requested contraction within its iteration cap."""


class InvarianceCheckError(SMTPCPSError, RuntimeError):
    """A computed terminal set failed its a-posteriori invariance certificate; retry with a smaller alpha_max."""


class ErosionEmptyError(SMTPCPSError, ValueError):
    """Eroding a target set by the disturbance set left nothing."""


class FamilyConstructionError(SMTPCPSError, RuntimeError):
    """The controllable family failed one of its certificates (nesting, admissibility)."""


class InfeasibleStateError(SMTPCPSError, ValueError):
    """The state lies outside the largest controllable set."""


class InternalInconsistencyError(SMTPCPSError, RuntimeError):
    """A quantity that is feasible by construction turned out infeasible."""


class ProtocolDesyncError(SMTPCPSError, RuntimeError):
    """Key inference found the state in both or neither controller reach set."""


class ConfigError(SMTPCPSError, ValueError):
    """Malformed or invalid run configuration.

    Attributes:
        line: 1-based line of the offending entry, if known.
        key: Configuration field the error refers to, if known.
        reason: The message without location prefix.
    """

    def __init__(self, message: str, line: int = None, path: str = None, key: str = None):
        self.line = line
        self.path = path
        self.key = key
        self.reason = message
        where = ''
        if path is not None:
            where += f'{path}:'
        if line is not None:
            where += f'{line}:'
        super().__init__(f'{where} {message}' if where else message)


class CacheError(SMTPCPSError, ValueError):
    """A family cache file is malformed or fails its checksum."""
