#!/usr/bin/env python

from setuptools import setup, find_packages

name = "pycsm"
author = "pycsm developers"

setup(
    name = name,
    author = author,
    description = "Causal contrast set mining of candidate risk factors for adverse drug reactions",
    entry_points = {
        'console_scripts': ['pycsm=csm.pycsm:_main'],
    },
    packages = find_packages(exclude=["tests", "examples", "examples.*"]),
    python_requires = '>=3.8',
    install_requires = [r.strip() for r in open("requirements.txt").readlines() if r.strip()]
)
