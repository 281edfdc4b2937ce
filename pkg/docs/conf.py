# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

# -- Project information -----------------------------------------------------

project = 'SMTP-CPS'
copyright = '2024, The SMTP-CPS team'
author = 'SMTP-CPS team'

# -- General configuration ---------------------------------------------------

extensions = [
    'autoapi.extension',
    'sphinx.ext.githubpages',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
    'myst_parser',
    'sphinx_rtd_theme',
]

autoapi_dirs = ['../smtpcps']

# private members stay out of the API pages
autoapi_options = ['members', 'undoc-members', 'show-inheritance', 'show-module-summary', 'special-members',
                   'imported-members']
# added manually in index.rst next to the usage pages
autoapi_add_toctree_entry = False

myst_enable_extensions = [
    'colon_fence',
    'deflist',
    'dollarmath',
]

myst_heading_anchors = 3

templates_path = ['_templates']

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

napoleon_google_docstring = True
autoclass_content = 'both'

python_use_unqualified_type_names = True

pygments_style = 'rainbow_dash'

# -- Options for HTML output -------------------------------------------------

stanford_theme_mod = True
html_theme_options = {
    'navigation_depth': 4,
}

html_static_path = [
    '_static'
]

if stanford_theme_mod:
    html_theme = 'sphinx_rtd_theme'

    def _import_theme():
        import shutil
        import sphinx_theme
        html_theme = 'stanford_theme'
        shutil.copytree(
            os.path.join(sphinx_theme.get_html_theme_path(html_theme), html_theme, 'static', 'fonts'),
            os.path.join('_static_gen', 'fonts'),
            dirs_exist_ok=True)
        shutil.copy2(
            os.path.join(sphinx_theme.get_html_theme_path(html_theme), html_theme, 'static', 'css', 'theme.css'),
            os.path.join('_static_gen', 'theme.css'),
        )

    _import_theme()
    html_static_path = ['_static_gen'] + html_static_path

# -- Options for LaTeX output ------------------------------------------------

latex_engine = 'xelatex'
latex_show_urls = 'footnote'
latex_theme = 'howto'


def setup(app):
    if stanford_theme_mod:
        app.add_css_file('theme.css')
    app.add_css_file('pygments.css')
