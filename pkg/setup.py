#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open('README.rst') as readme_file:
    readme = readme_file.read()

with open('HISTORY.rst') as history_file:
    history = history_file.read()

requirements = [
    "numpy>=1.17",
    "scipy>=1.8",
    "PyYAML",
]

setup_requirements = [
]

test_requirements = [
    "pytest",
]

setup(
    name='mmgn4py',
    version='0.1.0',
    description="1-bit matrix completion with majorization-minimization Gauss-Newton",
    long_description=readme + '\n\n' + history,

    author="mmgn4py developers",
    license="MIT License",

    packages=find_packages(include=['mmgn4py', 'mmgn4py.*']),
    entry_points={
        'console_scripts': [
            'mmgn4py = mmgn4py.cli:main',
        ]
    },
    include_package_data=False,

    install_requires=requirements,
    python_requires='>=3.8',

    zip_safe=True,
    keywords='mmgn4py matrix-completion 1-bit',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3 :: Only',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    test_suite='tests',
    tests_require=test_requirements,
    setup_requires=setup_requirements,
)
