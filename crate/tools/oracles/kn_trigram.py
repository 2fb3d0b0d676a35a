# Usage: python3 kn_trigram.py [fixture.tsv]
# Exact interpolated Kneser-Ney trigram oracle with rational arithmetic.
import sys
from fractions import Fraction as F
from collections import Counter, defaultdict

D = F(3, 4)
corpus = [
    "show flights from ci0 to ci1",
    "show flights to ci1",
    "list flights from ci0",
    "show fares from ci1 to ci0",
    "list fares",
]
sents = [s.split() for s in corpus]
BOS, EOS, UNK = "<s>", "</s>", "<unk>"

tri = Counter()
for s in sents:
    p = [BOS, BOS] + s + [EOS]
    for i in range(len(p) - 2):
        tri[tuple(p[i:i + 3])] += 1
V = sorted({w for (_, _, w) in tri} | {UNK})
# continuation counts
bi_cont = Counter()
for (u, v, w) in tri:
    bi_cont[(v, w)] += 1  # number of distinct u preceding (v, w)
uni_cont = Counter()
for (v, w) in bi_cont:
    uni_cont[w] += 1

def p_uni(w):
    total = sum(uni_cont.values())
    types = len(uni_cont)
    c = uni_cont.get(w, 0)
    return max(F(c) - D, F(0)) / total + D * types / total * F(1, len(V))

def p_bi(v, w):
    ctx = {x: c for (a, x), c in bi_cont.items() if a == v}
    low = p_uni(w)
    if not ctx:
        return low
    total = sum(ctx.values())
    c = ctx.get(w, 0)
    return max(F(c) - D, F(0)) / total + D * len(ctx) / total * low

def p_tri(u, v, w):
    ctx = {x: c for (a, b, x), c in tri.items() if (a, b) == (u, v)}
    low = p_bi(v, w)
    if not ctx:
        return low
    total = sum(ctx.values())
    c = ctx.get(w, 0)
    return max(F(c) - D, F(0)) / total + D * len(ctx) / total * low

def norm(w):
    return w if w in V else UNK

queries = [
    (BOS, BOS, "show"), (BOS, "show", "flights"), ("show", "flights", "from"),
    ("flights", "from", "ci0"), ("from", "ci0", "to"), ("ci0", "to", "ci1"),
    ("to", "ci1", EOS), ("show", "fares", "to"), ("list", "fares", "from"),
    (BOS, "list", "fares"), ("fares", "from", "ci0"), ("ci1", "to", "ci1"),
    ("from", "ci1", EOS), (BOS, BOS, "atlanta"), ("to", "ci0", "flights"),
]
rows = [("trigram", u, v, w, p_tri(u, v, norm(w))) for u, v, w in queries]
rows.append(("unigram", "-", "-", "flights", p_uni("flights")))
rows.append(("bigram", "-", "from", "ci0", p_bi("from", "ci0")))
out = sys.argv[1] if len(sys.argv) > 1 else None
lines = ["# order\tu\tv\tw\tnumerator\tdenominator"]
lines += [f"{o}\t{u}\t{v}\t{w}\t{p.numerator}\t{p.denominator}" for o, u, v, w, p in rows]
text = "\n".join(lines) + "\n"
if out:
    open(out, "w").write(text)
else:
    print(text, end="")
for ctx in [(BOS, BOS), ("show", "flights"), ("to", "ci0")]:
    assert sum(p_tri(ctx[0], ctx[1], w) for w in V) == 1
print("ok")
