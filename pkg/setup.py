# -*- coding: utf-8 -*-

import unittest

from setuptools import setup, find_packages


with open('README.rst') as f:
    readme = f.read()


def sdlab_test_suite():
    test_loader = unittest.TestLoader()
    # test_doctest.py adds the doctests of every package module
    test_suite = test_loader.discover('tests', pattern='test_*.py')
    return test_suite


setup(
    name='sdlab',
    version='0.1.0',
    description='sdlab - laboratory for the social distancing game on ' +
                'networks',
    long_description=readme,
    author='The sdlab Development Team',
    license="GNU Lesser General Public License",
    packages=find_packages(exclude=('tests', 'docs')),
    package_data={'sdlab': ['data/*.csv', 'data/*.txt']},
    test_suite='setup.sdlab_test_suite',
    python_requires='>=3.8',
    install_requires=['numpy>=1.17', 'scipy>=1.7', 'pandas>=1.5',
                      'networkx>=2.4'],
    setup_requires=[],
    tests_require=[],
    entry_points={'console_scripts': ['sdlab = sdlab.cli:main']},
    platforms='OS Independent',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU Lesser General Public License v3 ' +
            '(LGPLv3)',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering'],
)
