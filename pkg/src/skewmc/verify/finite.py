"""Exact GMH construction and checks on finite state spaces.

A finite chain is ``(pi, Q, s)``: a probability vector, a row-stochastic
proposal matrix and a self-inverse permutation with ``pi[s[i]] = pi[i]``.
With ``nu[i, j] = pi[i] Q[i, j]`` and its flipped version
``nu_s[i, j] = nu[s[j], s[i]]``, the density ``h = nu / (nu + nu_s)`` drives
the acceptance ratio ``alpha[i, j] = a(h[s[j], s[i]] / h[i, j])``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

import numpy as np
import tomli

from ..core import AcceptanceFunction
from ..gmh import RejectionPolicy
from .report import Report

ROW_TOL = 1e-12


class FiniteChainError(ValueError):
    """A finite chain violates one of its defining invariants."""


@dataclass(frozen=True, eq=False)
class FiniteChain:
    pi: np.ndarray
    Q: np.ndarray
    s_perm: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        s = np.asarray(self.s_perm)
        n = pi.shape[0] if pi.ndim == 1 else -1
        if pi.ndim != 1 or n < 1:
            raise FiniteChainError("pi must be a nonempty vector")
        if Q.shape != (n, n):
            raise FiniteChainError(f"Q must be {n}x{n}, got {Q.shape}")
        if s.shape != (n,) or not np.issubdtype(s.dtype, np.integer):
            raise FiniteChainError("s_perm must be an integer vector of length n")
        if sorted(s.tolist()) != list(range(n)):
            raise FiniteChainError("s_perm is not a permutation of 0..n-1")
        if not np.array_equal(s[s], np.arange(n)):
            raise FiniteChainError("s_perm is not an involution (s o s != id)")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > ROW_TOL:
            raise FiniteChainError("pi must be nonnegative and sum to 1")
        if np.any(Q < 0) or np.max(np.abs(Q.sum(axis=1) - 1.0)) > ROW_TOL:
            raise FiniteChainError("Q must be nonnegative with rows summing to 1")
        if np.max(np.abs(pi[s] - pi)) > ROW_TOL:
            raise FiniteChainError("pi is not s-invariant (pi[s[i]] != pi[i])")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "s_perm", s.astype(int))

    @property
    def n(self) -> int:
        return self.pi.shape[0]


def _flip(mat: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``out[i, j] = mat[s[j], s[i]]``."""
    return mat[np.ix_(s, s)].T


def random_self_inverse_perm(n: int, rng: np.random.Generator) -> np.ndarray:
    perm = rng.permutation(n)
    s = np.arange(n)
    for k in range(int(rng.integers(0, n // 2 + 1))):
        a, b = perm[2 * k], perm[2 * k + 1]
        s[a], s[b] = b, a
    return s


def random_finite_chain(n: int, rng: np.random.Generator, zero_mass_prob: float = 0.0,
                        sparsity: float = 0.0, s_perm=None) -> FiniteChain:
    """Random valid chain.

    Args:
        n: Number of states.
        rng: Generator.
        zero_mass_prob: Probability that an ``s``-orbit gets zero target mass.
        sparsity: Probability that a proposal entry is zeroed (each row keeps
            at least one positive entry).
        s_perm: Optional involution; random when omitted.
    """
    s = random_self_inverse_perm(n, rng) if s_perm is None else np.asarray(s_perm)
    w = rng.exponential(size=n)
    w = 0.5 * (w + w[s])
    if zero_mass_prob > 0:
        dead = rng.random(n) < zero_mass_prob
        dead = dead | dead[s]
        if not np.all(dead):
            w[dead] = 0.0
    pi = w / w.sum()
    Q = rng.exponential(size=(n, n))
    if sparsity > 0:
        Q[rng.random((n, n)) < sparsity] = 0.0
        empty = Q.sum(axis=1) == 0
        Q[empty, rng.integers(0, n, size=int(empty.sum()))] = 1.0
    Q = Q / Q.sum(axis=1, keepdims=True)
    return FiniteChain(pi, Q, s)


def finite_nu_decomposition(chain: FiniteChain):
    """Return ``(h, A, r)``.

    ``h`` is the density of ``nu`` w.r.t. ``nu + nu_s`` (0 where both vanish),
    ``A`` marks pairs with ``h * (h o F_s) > 0`` and ``r = h / (h o F_s)`` on
    ``A`` (``nan`` elsewhere).
    """
    nu = chain.pi[:, None] * chain.Q
    nu_s = _flip(nu, chain.s_perm)
    lam = nu + nu_s
    h = np.divide(nu, lam, out=np.zeros_like(nu), where=lam > 0)
    hs = _flip(h, chain.s_perm)
    A = (h * hs) > 0
    r = np.full_like(h, np.nan)
    r[A] = h[A] / hs[A]
    return h, A, r


def finite_alpha(chain: FiniteChain, fn: AcceptanceFunction) -> np.ndarray:
    """``alpha[i, j] = a(h[s j, s i] / h[i, j])`` where ``h > 0``, else 1."""
    h, _, _ = finite_nu_decomposition(chain)
    hs = _flip(h, chain.s_perm)
    alpha = np.ones_like(h)
    pos = h > 0
    with np.errstate(divide="ignore"):
        alpha[pos] = fn.from_log(np.log(hs[pos]) - np.log(h[pos]))
    return alpha


def finite_build_gmh(chain: FiniteChain, fn: AcceptanceFunction, policy: RejectionPolicy,
                     alpha: Optional[np.ndarray] = None) -> np.ndarray:
    """Transition matrix ``P = Q_alpha + diag(a) + b`` routed to ``s``.

    For ``optimal_flip`` the flip mass is ``max(0, Qa(s(i)) - Qa(i))``, which
    is always computable here.
    """
    if alpha is None:
        alpha = finite_alpha(chain, fn)
    P = alpha * chain.Q
    qa = P.sum(axis=1)
    stay, flip = policy.weights(qa, qa[chain.s_perm])
    idx = np.arange(chain.n)
    np.add.at(P, (idx, idx), stay)
    np.add.at(P, (idx, chain.s_perm), flip)
    return P


def check_s_symmetry(chain: FiniteChain, P: np.ndarray) -> float:
    """``max |pi[i] P[i, j] - pi[s j] P[s j, s i]|``."""
    flow = chain.pi[:, None] * P
    return float(np.max(np.abs(flow - _flip(flow, chain.s_perm))))


def check_acceptance_conditions(chain: FiniteChain, alpha: np.ndarray, A=None, r=None,
                                tol: float = 1e-12) -> Report:
    """Conditions (i) ``alpha = 0`` on ``{nu > 0} \\ A`` and (ii) ``alpha r = alpha o F_s`` on ``A``."""
    if A is None or r is None:
        _, A, r = finite_nu_decomposition(chain)
    nu_pos = (chain.pi[:, None] * chain.Q) > 0
    rep = Report("acceptance conditions")
    off = nu_pos & ~A
    worst_i = float(np.max(np.abs(alpha[off]))) if np.any(off) else 0.0
    where_i = _argmax_pair(np.where(off, np.abs(alpha), -1.0)) if np.any(off) else None
    rep.add("zero_outside_A", worst_i == 0.0, worst_i, 0.0,
            "" if not worst_i else f"worst at {where_i}")
    on = nu_pos & A
    alpha_s = _flip(alpha, chain.s_perm)
    gap = np.where(on, np.abs(alpha * np.nan_to_num(r) - alpha_s), 0.0)
    worst_ii = float(gap.max()) if gap.size else 0.0
    rep.add("ratio_identity_on_A", worst_ii <= tol, worst_ii, tol,
            f"worst at {_argmax_pair(gap)}" if worst_ii > tol else "")
    return rep


def _argmax_pair(mat):
    i, j = np.unravel_index(int(np.argmax(mat)), mat.shape)
    return int(i), int(j)


def check_invariance(chain: FiniteChain, P: np.ndarray) -> float:
    """``|pi^T P - pi^T|_inf``."""
    return float(np.max(np.abs(chain.pi @ P - chain.pi)))


def check_support_conditions(chain: FiniteChain) -> Report:
    """Positivity hypotheses for irreducibility.

    (1) For all ``i`` and every ``j`` with ``pi[j] > 0``: ``Q[i, j] > 0`` and
    ``Q[s i, s j] > 0``. (2) From every zero-mass state the proposal lands in
    the support with probability 1.
    """
    s = chain.s_perm
    rep = Report("support conditions")
    supp = chain.pi > 0
    bad = (chain.Q[:, supp] <= 0) | (chain.Q[np.ix_(s, s)][:, supp] <= 0)
    cols = np.flatnonzero(supp)
    if np.any(bad):
        i, jj = np.argwhere(bad)[0]
        rep.add("proposal_positive_into_support", False, float(bad.sum()), 0.0,
                f"first violation at (i={int(i)}, j={int(cols[jj])})")
    else:
        rep.add("proposal_positive_into_support", True, 0.0, 0.0)
    leak = 1.0 - chain.Q[~supp][:, supp].sum(axis=1)
    worst = float(np.max(np.abs(leak))) if leak.size else 0.0
    detail = ""
    if worst > ROW_TOL:
        detail = f"state {int(np.flatnonzero(~supp)[int(np.argmax(np.abs(leak)))])} leaks mass"
    rep.add("zero_mass_states_enter_support", worst <= ROW_TOL, worst, ROW_TOL, detail)
    return rep


def irreducibility_witness(chain: FiniteChain, P: np.ndarray) -> Optional[int]:
    """Smallest ``k <= n`` with ``P^k`` positive on the support block, else ``None``."""
    supp = chain.pi > 0
    M = P[np.ix_(supp, supp)]
    Mk = np.eye(M.shape[0])
    for k in range(1, chain.n + 1):
        Mk = Mk @ M
        if np.all(Mk > 0):
            return k
    return None


def check_singular_parts(chain: FiniteChain) -> Report:
    """Outside ``A`` the flow and its flipped version live on disjoint pairs."""
    nu = chain.pi[:, None] * chain.Q
    nu_s = _flip(nu, chain.s_perm)
    _, A, _ = finite_nu_decomposition(chain)
    overlap = (~A) & (nu > 0) & (nu_s > 0)
    rep = Report("singular parts")
    rep.add("disjoint_outside_A", not np.any(overlap), float(overlap.sum()), 0.0)
    return rep


def policy_admissible(chain: FiniteChain, fn: AcceptanceFunction, policy: RejectionPolicy,
                      tol: float = 1e-12) -> bool:
    """Whether the policy's stay mass satisfies ``a(i) = a(s(i))``.

    Skew detailed balance needs this. ``flip`` (``a = 0``) and
    ``optimal_flip`` always satisfy it; ``stay`` only when the acceptance mass
    ``Q_alpha(i, Z)`` is itself ``s``-invariant, e.g. for ``s = id``.
    """
    qa = (finite_alpha(chain, fn) * chain.Q).sum(axis=1)
    a, _ = policy.weights(qa, qa[chain.s_perm])
    return bool(np.max(np.abs(a - a[chain.s_perm])) <= tol)


def verify_finite_chain(chain: FiniteChain, fn: AcceptanceFunction, policy: RejectionPolicy,
                        tol: float = 1e-12) -> Report:
    """Full pipeline: decomposition, acceptance conditions, skew balance, invariance."""
    h, A, r = finite_nu_decomposition(chain)
    alpha = finite_alpha(chain, fn)
    P = finite_build_gmh(chain, fn, policy, alpha)
    rep = Report(f"finite chain n={chain.n} {fn.kind}/{policy.kind}")
    rep.extend(check_acceptance_conditions(chain, alpha, A, r, tol))
    qa = (alpha * chain.Q).sum(axis=1)
    stay, _ = policy.weights(qa, qa[chain.s_perm])
    asym = float(np.max(np.abs(stay - stay[chain.s_perm])))
    rep.add("stay_mass_s_invariant", asym <= tol, asym, tol)
    rows = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    rep.add("rows_sum_to_one", rows <= 1e-14 * chain.n, rows, 1e-14 * chain.n)
    sym = check_s_symmetry(chain, P)
    rep.add("skew_detailed_balance", sym <= tol, sym, tol)
    inv = check_invariance(chain, P)
    rep.add("invariance", inv <= tol, inv, tol)
    return rep


# -- lifted chains on X x {-1, +1} ----------------------------------------------

def lifted_finite_chain(pi0, q_plus, q_minus, rho: float) -> FiniteChain:
    """Chain on pairs ``(x, v)`` (index ``2 x + (v == 1)``) with direction flip as ``s``.

    From ``(x, v)`` keep ``w = v`` with probability ``rho``, else flip, then
    draw ``y ~ q_w(x, .)``.
    """
    pi0 = np.asarray(pi0, float)
    qs = {1: np.asarray(q_plus, float), -1: np.asarray(q_minus, float)}
    m = pi0.shape[0]
    n = 2 * m

    def idx(x, v):
        return 2 * x + (1 if v == 1 else 0)

    Q = np.zeros((n, n))
    for x in range(m):
        for v in (-1, 1):
            for w in (-1, 1):
                weight = rho if w == v else 1.0 - rho
                Q[idx(x, v), [idx(y, w) for y in range(m)]] += weight * qs[w][x]
    pi = np.repeat(pi0 / 2.0, 2)
    s = np.arange(n) ^ 1
    return FiniteChain(pi, Q, s)


def check_lifted_marginal_reversibility(pi0, q_plus, q_minus, fn: AcceptanceFunction,
                                        tol: float = 1e-12) -> float:
    """Detailed balance of the position marginal of the lifted kernel.

    Returns ``max |pi0(x) K(x, y) - pi0(y) K(y, x)|`` for ``x != y``, where
    ``K(x, y) = sum_v q_v(x, y) a(pi0(y) q_{-v}(y, x) / (pi0(x) q_v(x, y))) / 2``.
    """
    pi0 = np.asarray(pi0, float)
    qs = {1: np.asarray(q_plus, float), -1: np.asarray(q_minus, float)}
    K = np.zeros_like(qs[1])
    for v in (1, -1):
        den = pi0[:, None] * qs[v]
        num = pi0[None, :] * qs[-v].T
        alpha = np.ones_like(den)
        pos = den > 0
        with np.errstate(divide="ignore"):
            alpha[pos] = fn.from_log(np.log(num[pos]) - np.log(den[pos]))
        K += 0.5 * qs[v] * alpha
    np.fill_diagonal(K, 0.0)
    flow = pi0[:, None] * K
    return float(np.max(np.abs(flow - flow.T)))


# -- chain files -----------------------------------------------------------------

class ChainFileError(ValueError):
    """Unreadable or invalid finite-chain file."""


def _key_line(text: str, key: str) -> str:
    for k, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return f"line {k}"
    return "unknown line"


def _number(value, key, text):
    if isinstance(value, bool):
        raise ChainFileError(f"{key} ({_key_line(text, key)}): booleans are not numbers")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ChainFileError(f"{key} ({_key_line(text, key)}): cannot read {value!r} as a number")


def parse_finite_chain(text: str) -> FiniteChain:
    """Parse the TOML chain format.

    Keys: ``n`` (int), ``pi`` (n numbers), ``Q`` (n rows of n numbers),
    ``s_perm`` (n ints). Numbers may be TOML ints/floats or strings holding
    exact decimals or fractions such as ``"1/3"``.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ChainFileError(f"parse error: {exc}") from None
    for key in ("n", "pi", "Q", "s_perm"):
        if key not in doc:
            raise ChainFileError(f"missing key {key!r}")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ChainFileError(f"n ({_key_line(text, 'n')}): must be a positive integer")
    pi = doc["pi"]
    Q = doc["Q"]
    s = doc["s_perm"]
    if not isinstance(pi, list) or len(pi) != n:
        raise ChainFileError(f"pi ({_key_line(text, 'pi')}): need {n} entries")
    if not isinstance(Q, list) or len(Q) != n or any(not isinstance(r, list) or len(r) != n
                                                      for r in Q):
        raise ChainFileError(f"Q ({_key_line(text, 'Q')}): need {n} rows of {n} entries")
    if not isinstance(s, list) or len(s) != n or any(
            not isinstance(v, int) or isinstance(v, bool) for v in s):
        raise ChainFileError(f"s_perm ({_key_line(text, 's_perm')}): need {n} integers")
    pi_arr = np.array([_number(v, "pi", text) for v in pi])
    Q_arr = np.array([[_number(v, "Q", text) for v in row] for row in Q])
    try:
        return FiniteChain(pi_arr, Q_arr, np.array(s, dtype=int))
    except FiniteChainError as exc:
        raise ChainFileError(f"invalid chain: {exc}") from None


def load_finite_chain(path: Union[str, Path]) -> FiniteChain:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ChainFileError(f"cannot read {path}: {exc}") from None
    return parse_finite_chain(text)


def format_finite_chain(chain: FiniteChain) -> str:
    """Serialise with ``repr`` floats so that re-parsing is exact."""
    rows = ",\n  ".join("[" + ", ".join(repr(float(v)) for v in row) + "]" for row in chain.Q)
    return (f"n = {chain.n}\n"
            f"pi = [{', '.join(repr(float(v)) for v in chain.pi)}]\n"
            f"s_perm = [{', '.join(str(int(v)) for v in chain.s_perm)}]\n"
            f"Q = [\n  {rows},\n]\n")
