# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

import os
import unittest


def load_tests(loader, tests, pattern):  # @UnusedVariable
    this_dir = os.path.dirname(os.path.abspath(__file__))
    tests.addTests(loader.discover(start_dir=this_dir,
                                   pattern=pattern or 'test_*.py'))
    return tests


if __name__ == '__main__':
    unittest.main()
