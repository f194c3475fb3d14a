"""Compositional covariance functions for one-dimensional inputs.

A kernel expression is a small binary tree whose leaves are base kernels and
whose inner nodes are sums or products.  Hyperparameters live in a flat
vector of *raw* (unconstrained) values; the positive value used by the
kernel is ``softplus(raw)``.  The last raw entry is always the observation
noise variance.

Base kernels carry no output scale.  The four Mauna Loa presets ``K1``..``K4``
do carry one, since they are meant to rebuild a specific hand-crafted kernel.

Conventions for raw -> constrained values follow GPyTorch's ``Positive``
constraint: lengthscales, periods and ``alpha`` map to themselves, while
variance-like roles (``variance``, ``scale``, ``noise``) map to the variance,
not to its square root.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.special import expit

from .errors import KernelSyntaxError, LayoutError

__all__ = [
    "BASES",
    "Leaf",
    "Sum",
    "Product",
    "KernelExpr",
    "Slot",
    "HyperParams",
    "softplus",
    "inv_softplus",
    "parse_kernel",
    "render",
    "leaves",
    "size",
    "param_layout",
    "mauna_kernel",
    "gram",
    "eval_kernel",
    "is_stationary",
]

#: Roles of the hyperparameters of each base kernel, in layout order.
BASES = {
    "SE": ("lengthscale",),
    "LIN": ("variance",),
    "MAT32": ("lengthscale",),
    "PER": ("lengthscale", "period"),
    "RQ": ("lengthscale", "alpha"),
    # Mauna Loa components
    "K1": ("scale", "lengthscale"),
    "K2": ("scale", "lengthscale", "periodic_lengthscale"),
    "K3": ("scale", "lengthscale", "alpha"),
    "K4": ("scale", "lengthscale"),
}

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Leaf:
    base: str

    def __post_init__(self):
        if self.base not in BASES:
            raise LayoutError(f"unknown base kernel {self.base!r}")


@dataclass(frozen=True)
class Sum:
    left: "KernelExpr"
    right: "KernelExpr"


@dataclass(frozen=True)
class Product:
    left: "KernelExpr"
    right: "KernelExpr"


KernelExpr = Union[Leaf, Sum, Product]


def softplus(raw):
    """``log(1 + exp(raw))`` without overflow for large ``|raw|``."""
    return np.logaddexp(0.0, raw)


def inv_softplus(value):
    value = np.asarray(value, dtype=float)
    # log(expm1(v)) loses precision for large v; there softplus is the identity
    return np.where(value > 30.0, value, np.log(np.expm1(np.minimum(value, 30.0))))


# ----------------------------------------------------------------------------
# structure

def leaves(expr):
    """Leaves in depth-first, left-to-right order."""
    if isinstance(expr, Leaf):
        return [expr]
    return leaves(expr.left) + leaves(expr.right)


def size(expr):
    return len(leaves(expr))


def render(expr):
    """Infix text that :func:`parse_kernel` maps back to the same tree."""
    if isinstance(expr, Leaf):
        return expr.base
    left, right = render(expr.left), render(expr.right)
    if isinstance(expr, Sum):
        if isinstance(expr.right, Sum):
            right = f"({right})"
        return f"{left}+{right}"
    if isinstance(expr.left, Sum):
        left = f"({left})"
    if not isinstance(expr.right, Leaf):
        right = f"({right})"
    return f"{left}*{right}"


def is_stationary(expr):
    return all(leaf.base != "LIN" for leaf in leaves(expr))


_TOKEN = re.compile(r"[A-Za-z][A-Za-z0-9]*|[+*()]")


def _tokenize(text):
    """List of (kind, text, byte offset), terminated by an ``end`` token."""
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        offset = len(text[:pos].encode())
        if pos == len(text):
            tokens.append(("end", "", offset))
            return tokens
        m = _TOKEN.match(text, pos)
        if m is None:
            raise KernelSyntaxError(f"unexpected character {text[pos]!r}", offset)
        value = m.group()
        tokens.append(("name" if value[0].isalpha() else value, value, offset))
        pos = m.end()


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expr(self):
        node = self.product()
        while self.peek()[0] == "+":
            self.take()
            node = Sum(node, self.product())
        return node

    def product(self):
        node = self.term()
        while self.peek()[0] == "*":
            self.take()
            node = Product(node, self.term())
        return node

    def term(self):
        kind, value, offset = self.take()
        if kind == "name":
            name = value.upper()
            if name not in BASES:
                raise KernelSyntaxError(f"unknown base kernel {value!r}", offset)
            return Leaf(name)
        if kind == "(":
            node = self.expr()
            kind, value, offset = self.take()
            if kind != ")":
                raise KernelSyntaxError("expected ')'", offset)
            return node
        what = "end of input" if kind == "end" else repr(value)
        raise KernelSyntaxError(f"expected a kernel name or '(', got {what}", offset)


def parse_kernel(text):
    """Parse an infix kernel expression such as ``"SE+LIN*MAT32"``.

    ``*`` binds tighter than ``+``; both are left-associative.  Base names are
    case-insensitive.

    Raises
    ------
    KernelSyntaxError
        With ``offset`` set to the byte position of the offending token.
    """
    parser = _Parser(text)
    node = parser.expr()
    kind, value, offset = parser.peek()
    if kind != "end":
        raise KernelSyntaxError(f"unexpected {value!r}", offset)
    return node


def mauna_kernel(level):
    """Cumulative Mauna Loa kernel ``K1 + ... + K<level>``."""
    if level not in (1, 2, 3, 4):
        raise LayoutError(f"Mauna Loa kernel level must be 1..4, got {level!r}")
    expr = Leaf("K1")
    for i in range(2, level + 1):
        expr = Sum(expr, Leaf(f"K{i}"))
    return expr


# ----------------------------------------------------------------------------
# parameters

class Slot(NamedTuple):
    """One entry of the raw parameter vector.

    ``leaf`` is the depth-first leaf index, or ``None`` for the model noise
    when no ``K4`` leaf claims it.
    """

    leaf: int | None
    base: str
    role: str


def param_layout(expr):
    """Deterministic parameter layout of ``expr``; ``len(result)`` is ``u``.

    The trailing slot is always the noise variance.  If the expression has a
    ``K4`` leaf, its white-noise term *is* the model noise, so the slot is
    attributed to that leaf instead of adding a separate one.
    """
    slots = []
    noise_owner = None
    for i, leaf in enumerate(leaves(expr)):
        slots.extend(Slot(i, leaf.base, role) for role in BASES[leaf.base])
        if leaf.base == "K4" and noise_owner is None:
            noise_owner = i
    if noise_owner is None:
        slots.append(Slot(None, "noise", "noise"))
    else:
        slots.append(Slot(noise_owner, "K4", "noise"))
    return tuple(slots)


@dataclass
class HyperParams:
    """Raw hyperparameter vector bound to a layout."""

    raw: np.ndarray
    layout: tuple

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float)
        if self.raw.shape[-1:] != (len(self.layout),):
            raise LayoutError(
                f"expected {len(self.layout)} raw values, got shape {self.raw.shape}"
            )

    @classmethod
    def from_constrained(cls, expr, values):
        return cls(inv_softplus(values), param_layout(expr))

    @property
    def u(self):
        return len(self.layout)

    @property
    def constrained(self):
        return softplus(self.raw)

    @property
    def noise(self):
        return softplus(self.raw[..., -1])

    def as_dict(self):
        named = []
        for slot, r in zip(self.layout, np.atleast_1d(self.raw)):
            name = slot.role if slot.leaf is None else f"{slot.base}[{slot.leaf}].{slot.role}"
            named.append((name, float(r)))
        return dict(named)


# ----------------------------------------------------------------------------
# evaluation
#
# Each leaf function receives constrained parameters shaped (..., 1, 1), the
# signed difference matrix d = x1 - x2 and the product matrix x1 * x2, and
# returns the Gram block plus its derivatives w.r.t. each constrained value.

def _se(ell, d, d2):
    k = np.exp(-0.5 * d2 / ell**2)
    return k, k * d2 / ell**3


def _rq(ell, alpha, d2):
    q = 0.5 * d2 / (alpha * ell**2)
    k = np.exp(-alpha * np.log1p(q))
    dk_dell = k * 2.0 * alpha * q / (ell * (1.0 + q))
    dk_dalpha = k * (q / (1.0 + q) - np.log1p(q))
    return k, dk_dell, dk_dalpha


def _leaf_gram(base, p, d, xx, grad):
    d2 = d * d
    if base == "SE":
        k, g = _se(p[0], d, d2)
        return k, [g] if grad else None
    if base == "LIN":
        k = p[0] * xx
        return k, [np.broadcast_to(xx, k.shape)] if grad else None
    if base == "MAT32":
        # exp(-800) is already 0; the cap avoids inf * 0 for tiny lengthscales
        r = np.minimum(_SQRT3 * np.abs(d) / p[0], 800.0)
        e = np.exp(-r)
        k = (1.0 + r) * e
        return k, [r * r * e / p[0]] if grad else None
    if base == "PER":
        ell, period = p
        arg = np.pi * d / period
        s = np.sin(arg)
        k = np.exp(-2.0 * s * s / ell**2)
        if not grad:
            return k, None
        return k, [k * 4.0 * s * s / ell**3, k * 4.0 * s * np.cos(arg) * arg / (ell**2 * period)]
    if base == "RQ":
        k, g1, g2 = _rq(p[0], p[1], d2)
        return k, [g1, g2] if grad else None
    if base in ("K1", "K4"):
        scale = p[0]
        se, g = _se(p[1], d, d2)
        return scale * se, [se, scale * g] if grad else None
    if base == "K2":
        scale, ell, pell = p
        s2 = np.sin(np.pi * d) ** 2
        e = np.exp(-0.5 * d2 / ell**2 - 2.0 * s2 / pell**2)
        k = scale * e
        if not grad:
            return k, None
        return k, [e, k * d2 / ell**3, k * 4.0 * s2 / pell**3]
    if base == "K3":
        scale = p[0]
        rq, g1, g2 = _rq(p[1], p[2], d2)
        return scale * rq, [rq, scale * g1, scale * g2] if grad else None
    raise LayoutError(f"unknown base kernel {base!r}")


def _walk(node, theta, d, xx, grad, cursor):
    """Returns (K, [(raw index, dK/dconstrained)])."""
    if isinstance(node, Leaf):
        nparam = len(BASES[node.base])
        start = cursor[0]
        cursor[0] += nparam
        p = [theta[..., start + j][..., None, None] for j in range(nparam)]
        k, g = _leaf_gram(node.base, p, d, xx, grad)
        return k, (list(zip(range(start, start + nparam), g)) if grad else [])
    kl, gl = _walk(node.left, theta, d, xx, grad, cursor)
    kr, gr = _walk(node.right, theta, d, xx, grad, cursor)
    if isinstance(node, Sum):
        return kl + kr, gl + gr
    return kl * kr, [(i, g * kr) for i, g in gl] + [(i, kl * g) for i, g in gr]


def _check_raw(expr, raw):
    if isinstance(raw, HyperParams):
        raw = raw.raw
    raw = np.asarray(raw, dtype=float)
    u = len(param_layout(expr))
    if raw.ndim == 0 or raw.shape[-1] != u:
        raise LayoutError(f"kernel {render(expr)} needs {u} raw values, got shape {raw.shape}")
    return raw


def gram(expr, raw, x1, x2=None, grad=False):
    """Kernel matrix ``k(x1, x2)`` without the noise term.

    Parameters
    ----------
    expr : KernelExpr
    raw : array_like, shape (..., u)
        Raw hyperparameters; leading axes are broadcast, which lets the
        quadrature oracle evaluate a whole batch of grid points at once.
    x1, x2 : array_like, shape (n1,), (n2,)
        ``x2`` defaults to ``x1``.
    grad : bool
        Also return ``dK/draw_i`` for every kernel slot (all but the last).

    Returns
    -------
    K : ndarray, shape (..., n1, n2)
    dK : list of ndarray, only when ``grad`` is true
    """
    raw = _check_raw(expr, raw)
    x1 = np.asarray(x1, dtype=float)
    x2 = x1 if x2 is None else np.asarray(x2, dtype=float)
    d = x1[:, None] - x2[None, :]
    xx = x1[:, None] * x2[None, :]
    theta = softplus(raw)
    # extreme raw values (line-search probes) may give non-finite entries;
    # the Cholesky step reports them, so numpy warnings are only noise here
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        K, parts = _walk(expr, theta, d, xx, grad, [0])
    K = np.broadcast_to(K, raw.shape[:-1] + d.shape)
    if not grad:
        return K
    chain = expit(raw)
    dK = [np.zeros(K.shape) for _ in range(raw.shape[-1] - 1)]
    for i, g in parts:
        dK[i] = dK[i] + g * chain[..., i][..., None, None]
    return K, dK


def eval_kernel(expr, params, x, x2):
    """Scalar covariance ``k(x, x2)``.

    For ``K4`` the white-noise term is handled as the model noise and is not
    included here.
    """
    return float(gram(expr, params, [x], [x2])[..., 0, 0])
