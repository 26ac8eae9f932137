"""Shared plumbing: exceptions, Fibonacci numbers, rational helpers."""

from fractions import Fraction

import numpy as np


class ValidationError(ValueError):
    """Raised when an input fails a structural precondition."""


class CapacityError(RuntimeError):
    """Raised when a request exceeds a configured capacity cap."""


def fib(k):
    """Fibonacci number with fib(0) = 0, fib(1) = fib(2) = 1."""
    if k < 0:
        raise ValidationError(f"fib undefined for k = {k}")
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def binom2(m):
    """m choose 2."""
    return m * (m - 1) // 2


def as_fraction_array(num, denom):
    """Integer numerators over a common denominator, as an object array."""
    out = np.empty(len(num), dtype=object)
    for i, p in enumerate(num):
        out[i] = Fraction(int(p), denom)
    return out


def format_number(value):
    """Render a rational as p/q in lowest terms, a float with 17 significant digits."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def parse_number(text):
    """Inverse of format_number for "p/q", integer, and float strings."""
    text = text.strip()
    if "/" in text:
        p, q = text.split("/")
        return Fraction(int(p), int(q))
    try:
        return int(text)
    except ValueError:
        return float(text)
