# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

from concurrent.futures import ProcessPoolExecutor
from contextlib import redirect_stdout
import hashlib
import io

import numpy as np


def catch_stdout():
    """
    Redirect printed output into a string buffer for the enclosed block
    """
    return redirect_stdout(io.StringIO())


class classproperty(object):
    """
    Read-only property evaluated on the class, used for LabSystem flags
    """

    def __init__(self, getter):
        self.getter = getter

    def __get__(self, _instance, owner):
        return self.getter(owner)


def debug(*parts):
    """
    Print an indented trace line if debug mode is enabled
    """
    from .core import LabSystem
    if LabSystem.debug:
        print('  ', *parts)


def as_generator(rng):
    """
    Accept a seed, a SeedSequence or a Generator and return a Generator
    """
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def spawn_seeds(seed, count):
    """
    Independent child seed sequences for ``count`` parallel batches

    >>> a = spawn_seeds(7, 3)
    >>> b = spawn_seeds(7, 3)
    >>> [x.generate_state(1)[0] == y.generate_state(1)[0]
    ...  for x, y in zip(a, b)]
    [True, True, True]
    """
    return np.random.SeedSequence(seed).spawn(count)


def parallel_map(func, items, threads=None):
    """
    Ordered map over ``items``, using worker processes when threads > 1
    """
    from .core import LabSystem
    threads = LabSystem.threads if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text):
    return hashlib.sha256(text.encode('UTF-8')).hexdigest()
