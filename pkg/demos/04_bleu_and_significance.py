"""Corpus BLEU from sufficient statistics, and testing a BLEU gap.

Run with:  python3 demos/04_bleu_and_significance.py

Per-sentence statistics (clipped n-gram matches, totals, lengths) are
plain integers that add across sentences, so corpus BLEU and the
approximate-randomization significance test both work on sentence
stats without re-touching the text.
"""

from tsr import approx_randomization, bleu_score, bleu_stats, sum_stats

REF = [
    "a man rides a brown horse",
    "the dog runs across the field",
    "two people sit on a bench",
    "a train arrives at the station",
    "the sun sets behind the mountains",
]
SYSTEM_A = [
    "a man rides a brown horse",
    "the dog runs across a field",
    "two people sit on the bench",
    "a train arrives at the station",
    "the sun sets over the mountains",
]
SYSTEM_B = [
    "a man rides a horse",
    "a dog runs across the field",
    "two people sat on a bench",
    "the train arrived at a station",
    "the sun sets behind mountains",
]


def stats(system):
    return [
        bleu_stats(tuple(h.split()), tuple(r.split()))
        for h, r in zip(system, REF)
    ]


stats_a, stats_b = stats(SYSTEM_A), stats(SYSTEM_B)
for name, s in (("A", stats_a), ("B", stats_b)):
    total = sum_stats(s)
    print(f"system {name}: matches={total.matches} totals={total.totals}"
          f" hyp_len={total.hyp_len} ref_len={total.ref_len}")
    print(f"system {name}: BLEU = {100 * bleu_score(total):.2f}")

# The null hypothesis: A and B are the same system, so swapping their
# outputs on any subset of sentences should produce gaps at least as
# large as the observed one about as often as not. A small p-value
# means the observed gap would be rare under that null.
for trials in (100, 1000, 10000):
    p = approx_randomization(stats_a, stats_b, trials=trials, seed=42)
    print(f"approximate randomization, {trials:5d} trials: p = {p:.4f}")

# Fixed seeds make the estimate reproducible, and worker threads only
# split the same pre-spawned per-trial RNG streams.
p1 = approx_randomization(stats_a, stats_b, trials=5000, seed=7, workers=1)
p4 = approx_randomization(stats_a, stats_b, trials=5000, seed=7, workers=4)
print(f"workers=1 vs workers=4: {p1:.6f} == {p4:.6f}")
