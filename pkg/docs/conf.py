# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath('../src'))

# -- Project information -----------------------------------------------------

project = 'uavtwin'
copyright = '2021, Sandro Covo'
author = 'Sandro Covo'

release = '0.1.0'

# -- General configuration ---------------------------------------------------

extensions = ['myst_parser', 'sphinx.ext.autodoc']

autodoc_mock_imports = ['scipy', 'ZODB', 'BTrees', 'persistent', 'transaction']

templates_path = ['_templates']

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'

html_static_path = ['_static']
