#!/usr/bin/env python

from setuptools import setup, find_packages
from rdalloc import __version__

CONSOLE_SCRIPTS = ['rdalloc=rdalloc.rdalloc:main']
LONG = """
Content-adaptive operating point allocation for video corpora: cluster
rate-quality curves, classify chunks from cheap features, and pick one
encoder operating point per cluster under average and worst-case quality
constraints.
"""

setup(name="rdalloc",
      packages=find_packages(".", exclude=["scenarios"]),
      description='Corpus-level encoder operating point allocation',
      long_description=LONG,
      install_requires=[
          "numpy",
          "pandas",
          "scikit-learn",
          "progressbar2",
          "pytest"
      ],
      entry_points=dict(console_scripts=CONSOLE_SCRIPTS),
      version=__version__,
      classifiers=[
          "Development Status :: 2 - Pre-Alpha",
          "Environment :: Console",
          "License :: OSI Approved :: MIT License",
          "Operating System :: MacOS :: MacOS X",
          "Operating System :: POSIX :: Linux",
          "Programming Language :: Python :: 3",
      ])
