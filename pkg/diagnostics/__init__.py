# This file makes 'diagnostics' a Python package
