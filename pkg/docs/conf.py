#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# mmgn4py documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os

# Get the project root dir, which is the parent dir of this
cwd = os.getcwd()
project_root = os.path.dirname(cwd)

# Insert the project root dir as the first element in the PYTHONPATH.
# This lets us ensure that the source package is imported, and that its
# version is used.
sys.path.insert(0, project_root)

import mmgn4py

# -- General configuration ---------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.viewcode', 'numpydoc']

autosummary_generate = ["api.rst"]

autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
    'undoc-members': True,
    'inherited-members': False,
    'show-inheritance': True
}

autodoc_member_order = 'bysource'

default_role = "py:obj"

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'mmgn4py'
copyright = u"2026, mmgn4py developers"

version = mmgn4py.__version__
release = mmgn4py.__version__

exclude_patterns = ['_build']

pygments_style = 'sphinx'

# -- Options for HTML output -------------------------------------------

html_theme = 'default'

htmlhelp_basename = 'mmgn4pydoc'

# -- Options for LaTeX output ------------------------------------------

latex_documents = [
    ('index', 'mmgn4py.tex',
     u'mmgn4py Documentation',
     u'mmgn4py developers', 'manual'),
]

# -- Options for manual page output ------------------------------------

man_pages = [
    ('index', 'mmgn4py',
     u'mmgn4py Documentation',
     [u'mmgn4py developers'], 1)
]

# -- Options for Texinfo output ----------------------------------------

texinfo_documents = [
    ('index', 'mmgn4py',
     u'mmgn4py Documentation',
     u'mmgn4py developers',
     'mmgn4py',
     '1-bit matrix completion with majorization-minimization Gauss-Newton method.',
     'Miscellaneous'),
]
