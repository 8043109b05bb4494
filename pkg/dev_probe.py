import sys
sys.path.insert(0, "src")
from fractions import Fraction as F
from pfaffchain.chain import (chain_t2_order0_terms, chain_t2_correction_terms,
                              expand_lattice_terms)
from pfaffchain.lax import t2_even_w_terms

def canon_hand(terms):
    out = {}
    for c, factors in terms:
        key = tuple(sorted(("w", band, d) for band, d in factors))
        out[key] = out.get(key, F(0)) + F(c)
    return {k: v for k, v in out.items() if v}

all_ok = True
for k in range(-7, 8):
    mech = expand_lattice_terms(t2_even_w_terms(k), 2, rescale=True)
    for r in range(3):
        hand = canon_hand(chain_t2_order0_terms(k) if r == 0
                          else chain_t2_correction_terms(k, r))
        if hand != mech[r]:
            all_ok = False
            print(f"k={k} order={r} MISMATCH")
            for key in sorted(set(hand) | set(mech[r])):
                hv, mv = hand.get(key, 0), mech[r].get(key, 0)
                if hv != mv:
                    print(f"    {key}: hand={hv} lattice={mv}")
print("chain correction tables vs mechanical lattice expansion:",
      "ALL EXACT" if all_ok else "MISMATCHES FOUND")
