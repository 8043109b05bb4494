"""Dev tool: extract exact symbolic t2 flow tables from the commutator and
print them as canonical term lists for transcription into lax.py."""
import sys
sys.path.insert(0, "src")
from fractions import Fraction
from pfaffchain.integrability import Poly
from pfaffchain.lax import placements

BANDMAX = 12

def slot_id(kind, band, site):
    return ((site * (2 * BANDMAX + 1)) + (band + BANDMAX)) * 2 + (0 if kind == "w" else 1)

def slot_decode(sid):
    kind = "w" if sid % 2 == 0 else "v"
    rest = sid // 2
    band = rest % (2 * BANDMAX + 1) - BANDMAX
    site = rest // (2 * BANDMAX + 1)
    return kind, band, site

def sym_lax(M, depth):
    L = {}
    for n in range(1, M // 2 + 1):
        if 2 * n <= M:
            L[(2 * n - 2, 2 * n - 1)] = Poly.const(1)
    for kind, k, n, r, c in placements(M, depth):
        var = Poly.u(slot_id(kind, k, n))
        if kind == "v" and k == 0:
            L[(r, c)] = L.get((r, c), Poly()) + var
            if r + 1 < M:
                L[(r + 1, c + 1)] = L.get((r + 1, c + 1), Poly()) - var
        else:
            L[(r, c)] = L.get((r, c), Poly()) + var
    return {k: v for k, v in L.items() if v}

def sym_matmul(A, B):
    from collections import defaultdict
    Brows = defaultdict(list)
    for (m, c), val in B.items():
        Brows[m].append((c, val))
    out = {}
    for (r, m), a in A.items():
        for c, bval in Brows.get(m, ()):
            out[(r, c)] = out.get((r, c), Poly()) + a * bval
    return {k: v for k, v in out.items() if v}

def sym_project_t(A):
    out = {}
    half = Fraction(1, 2)
    def add(key, val):
        if val:
            out[key] = out.get(key, Poly()) + val
    for (r, c), val in A.items():
        if (r // 2) == (c // 2):
            add((r, c), val * half)
            pr, pc = c ^ 1, r ^ 1
            s2 = 1 if pr % 2 == 0 else -1
            t2 = -1 if pc % 2 == 0 else 1
            add((pr, pc), val * (-half * s2 * t2))
        elif r > c:
            add((r, c), val)
        else:
            pr, pc = c ^ 1, r ^ 1
            s2 = 1 if pr % 2 == 0 else -1
            t2 = -1 if pc % 2 == 0 else 1
            add((pr, pc), val * Fraction(-s2 * t2))
    return {k: v for k, v in out.items() if v}

def commutator(k_flow, M, depth):
    L = sym_lax(M, depth)
    P = L
    for _ in range(k_flow - 1):
        P = sym_matmul(P, L)
    Bt = {k: -Fraction(1) * v for k, v in sym_project_t(P).items()}
    C = sym_matmul(Bt, L)
    for key, val in sym_matmul(L, Bt).items():
        C[key] = C.get(key, Poly()) - val
    return {k: v for k, v in C.items() if v}

def decode_terms(poly, n0):
    out = {}
    for mono, coeff in poly.terms.items():
        factors = tuple(sorted(
            (kind, band, site - n0)
            for kind, band, site in (slot_decode(s) for s in mono)))
        out[factors] = out.get(factors, Fraction(0)) + coeff
    return {f: c for f, c in out.items() if c}

def fmt(terms):
    bits = []
    for f in sorted(terms):
        c = terms[f]
        fs = ", ".join(f"_{kind}({band}, {off})" for kind, band, off in f)
        coeff = {Fraction(1): "1", Fraction(-1): "-1",
                 Fraction(1, 2): "Half", Fraction(-1, 2): "-Half"}.get(c, f"F({c})")
        bits.append(f"        ({coeff}, ({fs}{',' if len(f)==1 else ''})),")
    return "\n".join(bits)

depth, sites, n0 = 8, 44, 22
M = 2 * sites
C = commutator(2, M, depth)
pos = {(kind, k, n): (r, c) for kind, k, n, r, c in placements(M, depth)}

for kind in ("v", "w"):
    print(f"##### t2 {kind}-tables (truth from commutator)")
    for band in range(-6, 7):
        r, c = pos[(kind, band, n0)]
        terms = decode_terms(C.get((r, c), Poly()), n0)
        # drop factors beyond |band| > 6: depth-truncation artifacts are absent
        # here because depth=8 > 6+2 window of interest
        print(f"    # {kind}^{band}:")
        print(fmt(terms))
print("done")
