#!/usr/bin/env python

from setuptools import setup

setup_requires = [
]
install_requires = [
    'numpy',
    'scipy',
    'joblib',
    'cvxpy',
    'cvxopt',
    'tqdm',
]
tests_require = [
    'hypothesis',
    'coverage',
    'pylint',
    'mypy',
]


setup(
    name='twohop-dht',
    version='0.0.1a',
    description='Error-exponent regions and finite-blocklength simulation for '
                'two-hop distributed hypothesis testing under expected-rate '
                'constraints',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    author='',
    author_email='',
    url='',
    setup_requires=setup_requires,
    install_requires=install_requires,
    tests_require=tests_require,
    extras_require={'test': tests_require},
    classifiers=[
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
    ],
    python_requires='>=3.8',
    test_suite='twohop_dht',
    packages=[
        'twohop_dht',
        'twohop_dht.sim',
        'twohop_dht.tests',
    ],
    package_dir={
        'twohop_dht': 'twohop_dht',
    },
    entry_points={
        'console_scripts': [
            'twohop-dht=twohop_dht.cli_reports:main',
        ],
    },
)
