"""
Weighting criteria by entropy, ranking by TOPSIS
================================================

Four candidate captions scored on three criteria. We shift the matrix so it
is non-negative, let the spread of each column decide its weight, and rank
by closeness to the ideal point.
"""

import numpy as np

from captionmcdm import DecisionMatrix, entropy_weights, shift_nonnegative, topsis_rank

# rows are candidates, columns are objects / attributes / actions
raw = DecisionMatrix(
    np.array([
        [1.00, 0.19, 0.0],
        [0.00, 0.19, 0.0],
        [0.50, -0.75, 0.0],
        [-0.17, -0.50, 0.0],
    ]),
    column_labels=("objects", "attributes", "actions"),
)

# slot scores can be negative; entropy needs proportions, so shift each column
shifted = shift_nonnegative(raw)
print("offsets per column:", shifted.offsets)
print(shifted.values)

###############################################################################
# A column where every candidate scores the same carries no information.
# Here the actions column is all zero, so its weight comes out as exactly 0.

w = entropy_weights(shifted)
for name, e, weight in zip(shifted.column_labels, w.entropy, w.weights):
    print(f"{name:10s}  entropy={e:.4f}  weight={weight:.4f}")

###############################################################################
# TOPSIS normalises each column, applies the weights and measures the
# distance to the best and worst value seen in each column.

result = topsis_rank(shifted, w)
print("closeness:", np.round(result.closeness, 4))
print("ranking  :", result.ranking)

# the first row holds the best value in every weighted column, so it sits on
# the ideal point and scores exactly 1
assert result.ranking[0] == 0 and result.closeness[0] == 1.0

###############################################################################
# Rescaling a column leaves the decision alone, because every column is
# vector-normalised before weighting.

rescaled = DecisionMatrix(shifted.values * np.array([10.0, 0.01, 3.0]))
again = topsis_rank(rescaled, w)
print("max closeness change after rescaling:", np.abs(again.closeness - result.closeness).max())
