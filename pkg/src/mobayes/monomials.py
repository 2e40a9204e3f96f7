"""Dense-free multivariate polynomials as exponent-tuple dictionaries.

Test functions on a finite space of d points turn every functional here into
an ordinary polynomial in d variables. This tiny algebra (add, multiply,
partial derivative, evaluate) composes such polynomials symbolically, which
gives an oracle for the partition-sum chain rule that never enumerates a
partition itself.
"""

from __future__ import annotations

import itertools
import math
from typing import Mapping

import numpy as np

Poly = dict[tuple[int, ...], float]


def poly_zero(nvars: int) -> Poly:
    return {}


def poly_const(nvars: int, c: float) -> Poly:
    if c == 0.0:
        return {}
    return {(0,) * nvars: float(c)}


def poly_var(nvars: int, i: int) -> Poly:
    expo = [0] * nvars
    expo[i] = 1
    return {tuple(expo): 1.0}


def poly_add(p: Poly, q: Poly, scale: float = 1.0) -> Poly:
    out = dict(p)
    for expo, coeff in q.items():
        out[expo] = out.get(expo, 0.0) + scale * coeff
    return out


def poly_mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            expo = tuple(a + b for a, b in zip(e1, e2))
            out[expo] = out.get(expo, 0.0) + c1 * c2
    return out


def poly_scale(p: Poly, c: float) -> Poly:
    return {expo: coeff * c for expo, coeff in p.items()}


def poly_diff(p: Poly, var: int) -> Poly:
    out: Poly = {}
    for expo, coeff in p.items():
        k = expo[var]
        if k == 0:
            continue
        lowered = list(expo)
        lowered[var] = k - 1
        out[tuple(lowered)] = out.get(tuple(lowered), 0.0) + coeff * k
    return out


def poly_eval(p: Poly, point: np.ndarray) -> float:
    point = np.asarray(point, dtype=float)
    total = 0.0
    for expo, coeff in p.items():
        term = coeff
        for var, k in enumerate(expo):
            if k:
                term *= point[var] ** k
        total += term
    return total


def tensor_functional_poly(tensors, nvars: int) -> Poly:
    """Expand sum_n (1/n!) c_n[psi^n] into a polynomial in psi's entries."""
    out: Poly = {}
    for n, t in enumerate(tensors):
        t = np.asarray(t, dtype=float)
        weight = 1.0 / math.factorial(n)
        for idx in itertools.product(range(nvars), repeat=n):
            coeff = float(t[idx]) if n else float(t)
            if coeff == 0.0:
                continue
            expo = [0] * nvars
            for i in idx:
                expo[i] += 1
            key = tuple(expo)
            out[key] = out.get(key, 0.0) + weight * coeff
    return {k: v for k, v in out.items() if v != 0.0}


def compose_tensor_with_map(tensors, component_polys: list[Poly], nvars: int) -> Poly:
    """Polynomial of psi -> f(g(psi)) for a coefficient functional f.

    component_polys[x] is the polynomial (in psi's entries) of the inner
    map's x-th output component. The composition is expanded term by term:
    the cardinality-n tensor contributes (1/n!) sum over index tuples of
    f_n(x_1..x_n) prod_i g_{x_i}(psi).
    """
    out: Poly = {}
    d_out = len(component_polys)
    for n, t in enumerate(tensors):
        t = np.asarray(t, dtype=float)
        weight = 1.0 / math.factorial(n)
        for idx in itertools.product(range(d_out), repeat=n):
            coeff = float(t[idx]) if n else float(t)
            if coeff == 0.0:
                continue
            term = poly_const(nvars, weight * coeff)
            for i in idx:
                term = poly_mul(term, component_polys[i])
            out = poly_add(out, term)
    return {k: v for k, v in out.items() if v != 0.0}


def tensor_map_component_polys(coefficients, nvars: int) -> list[Poly]:
    """Per-output-point polynomials of a function-valued polynomial map."""
    d_out = np.asarray(coefficients[0]).shape[0]
    polys: list[Poly] = [poly_zero(nvars) for _ in range(d_out)]
    for j, c in enumerate(coefficients):
        c = np.asarray(c, dtype=float)
        weight = 1.0 / math.factorial(j)
        for x in range(d_out):
            block = c[x]
            for idx in itertools.product(range(nvars), repeat=j):
                coeff = float(block[idx]) if j else float(block)
                if coeff == 0.0:
                    continue
                expo = [0] * nvars
                for i in idx:
                    expo[i] += 1
                key = tuple(expo)
                polys[x][key] = polys[x].get(key, 0.0) + weight * coeff
    return polys


def mixed_partial_at(p: Poly, variables, point: np.ndarray) -> float:
    """d^k p / d psi(z_1) ... d psi(z_k) evaluated at the given point."""
    cur = p
    for var in variables:
        cur = poly_diff(cur, var)
    return poly_eval(cur, point)
