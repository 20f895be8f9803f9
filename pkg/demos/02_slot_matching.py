"""
Matching query slots against a caption
======================================

Objects, attributes and actions are compared item by item. Pairs above the
threshold H are matched greedily, best first; anything left over is penalised.
"""

from captionmcdm import EmbeddingTable, MatchParams, PosLexicon, extract_caption_slots, tokenize
from captionmcdm.matching import match_items, match_pairs

# a tiny table built so that red+jacket and blue+jacket have cosine 5.28 / 6
table = EmbeddingTable.from_dict({
    "jacket": [1, 0, 0, 0, 0],
    "red": [1, 1, 0.8, 0.6, 0],
    "blue": [1, 1, 0.8, -0.6, 0],
    "black": [1, 1, -0.8, 0, 0],
    "man": [0, 0, 0, 0, 1],
    "snow": [0, 0, 0, 1, 0],
})
params = MatchParams(threshold_H=0.85)

###############################################################################
# Caption slots come from a part-of-speech lexicon. An adjective pairs with
# the nearest noun a few tokens ahead.

pos = PosLexicon({
    "man": "noun", "jacket": "noun", "snow": "noun",
    "red": "adjective", "blue": "adjective", "black": "adjective",
})
caption = tokenize("A man in a blue jacket on the snow.")
slots = extract_caption_slots(caption, pos)
print(slots.to_dict())

###############################################################################
# Objects: three query items, three caption items, all exact.

objects = match_items(["man", "jacket", "snow"], slots.objects, table, params)
print("objects score:", objects.score, objects.matches)

###############################################################################
# Attributes: the query asks for a red jacket and a black jacket. The blue
# jacket clears the threshold against the red one at 0.88. Black+jacket
# against blue+jacket is only 0.75, so that query pair stays unmatched, and
# the extra query item costs 1/2. The score is (0.88 - 0.5) / 2.

attrs = match_pairs([("red", "jacket"), ("black", "jacket")], slots.attribute_pairs, table, params)
print("attribute matches:", attrs.matches)
print("attribute score  :", round(attrs.score, 12))

###############################################################################
# Raising H to 0.9 rejects the jacket pair. The pairing lost is charged -1.

strict = match_pairs([("red", "jacket")], slots.attribute_pairs, table, MatchParams(0.9))
print("with H=0.9:", strict.score, strict.matches)
