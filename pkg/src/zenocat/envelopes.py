"""Piecewise-polynomial drive envelopes.

Protocol envelopes are piecewise linear; products of envelopes (which appear
when a modulated collapse operator enters the dissipator quadratically) are
piecewise quadratic.  Representing them as exact piecewise polynomials lets
the compiled stepper evaluate every coefficient without calling back into
Python.  Arbitrary callables are also accepted as envelopes throughout the
package; they just take the slower evaluation path.
"""

from __future__ import annotations

import numpy as np

__all__ = ["PiecewisePoly", "piecewise_linear"]


def _shift_poly(coeffs: np.ndarray, delta: float) -> np.ndarray:
    """Recenter p(s) to q(u) = p(u + delta); coeffs in ascending order."""
    out = np.zeros_like(coeffs)
    # Horner in the shifted variable: q = ((c_k)u + ...) built from the top
    for c in coeffs[::-1]:
        out = np.polynomial.polynomial.polymul(out, [delta, 1.0])[: len(coeffs)]
        pad = np.zeros_like(coeffs)
        pad[: len(out)] = out
        out = pad
        out[0] += c
    return out


class PiecewisePoly:
    """Polynomial segments on [breaks[i], breaks[i+1]), constant outside.

    ``coeffs[i]`` holds ascending-order coefficients in the local variable
    (t - breaks[i]).  Evaluation clamps t into [breaks[0], breaks[-1]], which
    extends the first/last segment values as constants.
    """

    __slots__ = ("breaks", "coeffs")

    def __init__(self, breaks, coeffs):
        breaks = np.asarray(breaks, dtype=float)
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if breaks.ndim != 1 or breaks.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if coeffs.shape[0] != breaks.size - 1:
            raise ValueError("one coefficient row per segment required")
        self.breaks = breaks
        self.coeffs = coeffs

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tc = np.clip(t, self.breaks[0], self.breaks[-1])
        idx = np.clip(np.searchsorted(self.breaks, tc, side="right") - 1, 0, len(self.coeffs) - 1)
        local = tc - self.breaks[idx]
        vals = np.zeros_like(local)
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            vals = vals * local + self.coeffs[idx, k]
        return float(vals) if scalar else vals

    def _resegmented(self, breaks: np.ndarray) -> "PiecewisePoly":
        """Re-express on a finer strictly-increasing breakpoint grid."""
        ncoef = self.coeffs.shape[1]
        out = np.zeros((breaks.size - 1, ncoef))
        for i in range(breaks.size - 1):
            b = breaks[i]
            bc = min(max(b, self.breaks[0]), self.breaks[-1])
            j = min(
                max(int(np.searchsorted(self.breaks, bc, side="right")) - 1, 0),
                len(self.coeffs) - 1,
            )
            if b < self.breaks[0]:
                # constant extension on the left
                out[i, 0] = self(self.breaks[0])
            elif b >= self.breaks[-1]:
                out[i, 0] = self(self.breaks[-1])
            else:
                out[i] = _shift_poly(self.coeffs[j], b - self.breaks[j])
        return PiecewisePoly(breaks, out)

    def product(self, other: "PiecewisePoly") -> "PiecewisePoly":
        breaks = np.unique(np.concatenate([self.breaks, other.breaks]))
        a = self._resegmented(breaks)
        b = other._resegmented(breaks)
        deg = a.degree + b.degree
        coeffs = np.zeros((breaks.size - 1, deg + 1))
        for i in range(breaks.size - 1):
            prod = np.polynomial.polynomial.polymul(a.coeffs[i], b.coeffs[i])
            coeffs[i, : prod.size] = prod
        return PiecewisePoly(breaks, coeffs)

    def power(self, k: int) -> "PiecewisePoly":
        if k < 1:
            raise ValueError("power must be >= 1")
        out = self
        for _ in range(k - 1):
            out = out.product(self)
        return out

    def __repr__(self):
        return f"PiecewisePoly(segments={len(self.coeffs)}, degree={self.degree})"


def piecewise_linear(knots) -> PiecewisePoly:
    """Build a PiecewisePoly from (time, value) knots.

    Consecutive knots at distinct times become linear segments; two knots at
    the same time encode a step (the segment to the right starts at the
    second value).  A trailing step needs a closing knot after it, since the
    function extends its last segment as a constant.
    """
    pts = [(float(t), float(v)) for t, v in knots]
    for (t0, _), (t1, _) in zip(pts, pts[1:]):
        if t1 < t0:
            raise ValueError("knot times must be non-decreasing")
    segs = [
        (ta, tb, va, vb)
        for (ta, va), (tb, vb) in zip(pts, pts[1:])
        if tb > ta
    ]
    if not segs:
        t0, v0 = pts[-1]
        return PiecewisePoly([t0, t0 + 1.0], [[v0, 0.0]])
    breaks = np.array([s[0] for s in segs] + [segs[-1][1]])
    coeffs = np.array([[va, (vb - va) / (tb - ta)] for ta, tb, va, vb in segs])
    return PiecewisePoly(breaks, coeffs)
