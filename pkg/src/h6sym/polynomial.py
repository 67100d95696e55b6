"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping


def _as_fraction(value) -> Fraction:
    if isinstance(value, bool):
        raise TypeError("booleans are not polynomial coefficients")
    if isinstance(value, Rational):
        return Fraction(value)
    raise TypeError(
        f"exact polynomial coefficients must be int or Fraction, got {type(value).__name__}"
    )


def _grlex_key(exponents: tuple[int, ...]):
    return (sum(exponents), exponents)


class MultiPoly:
    """Polynomial over a fixed, ordered tuple of variable names.

    Terms are stored as ``{exponent tuple: Fraction}`` with zero coefficients
    dropped, so two polynomials over the same variables are equal iff their
    term dictionaries are equal.  Instances are treated as immutable.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Iterable[str], terms: Mapping[tuple[int, ...], object] | None = None):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError(f"duplicate variable names in {self.variables}")
        clean: dict[tuple[int, ...], Fraction] = {}
        n = len(self.variables)
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent tuple {exps} for {n} variables")
            c = _as_fraction(coeff)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self.terms = clean

    # construction helpers

    @classmethod
    def constant(cls, value, variables: Iterable[str]) -> "MultiPoly":
        variables = tuple(variables)
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, name: str, variables: Iterable[str]) -> "MultiPoly":
        variables = tuple(variables)
        if name not in variables:
            raise ValueError(f"unknown variable {name!r}; expected one of {variables}")
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exps: 1})

    @classmethod
    def gens(cls, variables: Iterable[str]) -> tuple["MultiPoly", ...]:
        variables = tuple(variables)
        return tuple(cls.variable(v, variables) for v in variables)

    @classmethod
    def _raw(cls, variables, terms) -> "MultiPoly":
        obj = cls.__new__(cls)
        obj.variables = variables
        obj.terms = terms
        return obj

    # inspection

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms in descending graded-lexicographic order."""
        return sorted(self.terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    def __len__(self) -> int:
        return len(self.terms)

    # arithmetic

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other.variables != self.variables:
                raise ValueError(
                    f"variable-set mismatch: {self.variables} vs {other.variables}"
                )
            return other
        return MultiPoly.constant(_as_fraction(other), self.variables)

    def __add__(self, other) -> "MultiPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        terms = dict(self.terms)
        for exps, c in other.terms.items():
            s = terms.get(exps, 0) + c
            if s:
                terms[exps] = s
            else:
                terms.pop(exps, None)
        return MultiPoly._raw(self.variables, terms)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly._raw(self.variables, {e: -c for e, c in self.terms.items()})

    def __pos__(self) -> "MultiPoly":
        return self

    def __sub__(self, other) -> "MultiPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "MultiPoly":
        return (-self) + other

    def __mul__(self, other) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            try:
                c = _as_fraction(other)
            except TypeError:
                return NotImplemented
            if not c:
                return MultiPoly._raw(self.variables, {})
            return MultiPoly._raw(self.variables, {e: v * c for e, v in self.terms.items()})
        other = self._coerce(other)
        terms: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(e, 0) + c1 * c2
                if s:
                    terms[e] = s
                else:
                    terms.pop(e, None)
        return MultiPoly._raw(self.variables, terms)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "MultiPoly":
        try:
            c = _as_fraction(other)
        except TypeError:
            return NotImplemented
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return MultiPoly._raw(self.variables, {e: v / c for e, v in self.terms.items()})

    def __pow__(self, n: int) -> "MultiPoly":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = MultiPoly.constant(1, self.variables)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, MultiPoly):
            return self.variables == other.variables and self.terms == other.terms
        try:
            return self == MultiPoly.constant(_as_fraction(other), self.variables)
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        return hash((self.variables, frozenset(self.terms.items())))

    # calculus / evaluation

    def diff(self, name: str) -> "MultiPoly":
        i = self.variables.index(name)
        terms = {}
        for exps, c in self.terms.items():
            k = exps[i]
            if k:
                e = exps[:i] + (k - 1,) + exps[i + 1:]
                terms[e] = c * k
        return MultiPoly._raw(self.variables, terms)

    def evaluate(self, env: Mapping[str, object]):
        """Evaluate with arbitrary ring-like values (numbers, duals, polynomials)."""
        values = [env[v] for v in self.variables]
        exact = all(isinstance(x, (Rational, MultiPoly)) for x in values)
        total = 0
        for exps, c in self.sorted_terms():
            term = c if exact else float(c)
            for x, k in zip(values, exps):
                if k:
                    term = term * x**k
            total = total + term
        return total

    def substitute(self, mapping: Mapping[str, "MultiPoly"], variables: Iterable[str]) -> "MultiPoly":
        """Replace every variable by a polynomial over ``variables``."""
        variables = tuple(variables)
        result = MultiPoly(variables)
        for exps, c in self.terms.items():
            term = MultiPoly.constant(c, variables)
            for name, k in zip(self.variables, exps):
                if k:
                    term = term * mapping[name] ** k
            result = result + term
        return result

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.sorted_terms():
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(self.variables, exps) if k
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                coeff = str(c) if c.denominator == 1 else f"({c})"
                parts.append(f"{coeff}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")
