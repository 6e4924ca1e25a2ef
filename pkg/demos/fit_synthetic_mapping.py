"""Fit an embedding-to-EPA mapping on synthetic data and estimate new emojis.

Real use starts from word2vec files and a surveyed dictionary; here both
are generated so the script runs offline.  The hidden truth is a quadratic
function of a linear projection, which is what the mapping is built to find.
"""

import numpy as np

from emotrack.embeddings import AlignedPairs, EmbeddingTable
from emotrack.lexicon import AffectiveLexicon, Kind
from emotrack.mapper import SplitSpec, extend_lexicon, fit_mapping

rng = np.random.default_rng(7)
n, d = 3000, 50

x = rng.normal(size=(n, d))
P = rng.normal(size=(d, 3)) / np.sqrt(d)
t = x @ P
z = 1.5 * t + np.column_stack([0.1 * t[:, 0] ** 2, -0.1 * t[:, 0] * t[:, 1], 0.05 * t[:, 1] * t[:, 2]])
pairs = AlignedPairs(tuple(f"word{i}" for i in range(n)), x, z)

model = fit_mapping(pairs, SplitSpec(train_fraction=0.85, seed=0))
print(f"trained on {model.train_size} terms, tested on {model.test_size}")
for dim, metrics in model.metrics.items():
    kept = ", ".join(model.regressions[dim].names)
    print(f"  {dim}: r={metrics['r']:.4f} rmse={metrics['rmse']:.4f}  terms [{kept}]")

# Emojis only need an embedding to get an estimate.
emojis = ["\U0001F600", "\U0001F622", "\U0001F621", "\U0001F60D"]
table = EmbeddingTable.from_dict({e: rng.normal(size=d) for e in emojis})
lexicon, report = extend_lexicon(model, table, [(e, Kind.EMOJI) for e in emojis], AffectiveLexicon())
for entry in lexicon.of_kind(Kind.EMOJI):
    print(f"  {entry.term}  E={entry.epa.e:+.2f} P={entry.epa.p:+.2f} A={entry.epa.a:+.2f}")
