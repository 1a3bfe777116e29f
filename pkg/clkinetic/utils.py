# ##############################################################################
#                                                                              #
#                                   utils.py                                   #
#                                                                              #
# ##############################################################################

import os
import re
import math
import hashlib
import logging
import datetime

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil

from scipy import stats

log = logging.getLogger(__name__)

# ##############################################################################
#                                                                              #
#                              General helpers                                 #
#                                                                              #
# ##############################################################################

def timestamp():
    return datetime.datetime.now().strftime("%Y%m%d-%H%M%S")

def to_bool(value):
    if isinstance(value, bool):
        return value
    elif isinstance(value, int):
        return 0 != value
    elif isinstance(value, float):
        return 0 != value
    elif isinstance(value, str):
        s = value.lower().strip()
        return s in ['true', 'y', 'yes', 'on', '1']
    return False

## lower-case and strip spaces, periods and hyphens so "r-par", "R_PAR" and "r par" agree
def normalize_key(key):
    return re.sub(r"[ .-]", "_", key.strip()).lower()

## fixed, locale-independent float text used by every CSV writer
def format_float(x):
    return "%.17g" % float(x)

def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

def memory_rss():
    return psutil.Process(os.getpid()).memory_info().rss

# ##############################################################################
#                                                                              #
#                              Random streams                                  #
#                                                                              #
# ##############################################################################

##
# Independent generator for an integer key path, e.g. stream(seed, m, n, i).
# Same (seed, key) always gives the same numbers; different keys never share
# a stream.
def stream(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))

## [start, stop) index ranges of fixed size; the last block may be short
def block_ranges(count, block_size):
    block_size = max(1, int(block_size))
    return [(start, min(start + block_size, count)) for start in range(0, count, block_size)]

##
# Run func(block_index, start, stop) over all blocks and return the results in
# block order. With threads <= 1 everything runs inline.
def run_blocks(func, count, block_size, threads=1):
    blocks = block_ranges(count, block_size)
    if threads is None or threads <= 1 or len(blocks) <= 1:
        return [func(i, start, stop) for i, (start, stop) in enumerate(blocks)]

    log.debug("run_blocks: %d blocks on %d threads", len(blocks), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(func, i, start, stop) for i, (start, stop) in enumerate(blocks)]
        return [f.result() for f in futures]

# ##############################################################################
#                                                                              #
#                              Vector helpers                                  #
#                                                                              #
# ##############################################################################

def norm(v):
    return np.linalg.norm(v, axis=-1)

def dot(a, b):
    return np.sum(a * b, axis=-1)

def unit(v):
    v = np.asarray(v, dtype=float)
    n = norm(v)
    return v / n[..., None] if v.ndim > 1 else v / n

## n uniformly distributed unit vectors, shape (n, 3)
def sample_unit_sphere(n, rng):
    z = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)

# ##############################################################################
#                                                                              #
#                              Statistics                                      #
#                                                                              #
# ##############################################################################

## Wilson score interval for hits out of trials at the given confidence
def wilson_interval(hits, trials, confidence=0.9973):
    if trials <= 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(hits), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))

def binomial_sigma(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n > 0 else float("inf")
