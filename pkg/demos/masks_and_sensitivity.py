"""Build the region masks for a two-object layout and look at the sensitivity vector."""

from pathlib import Path

import numpy as np

from ast_attn.masks import assemble, build_sensitivity
from ast_attn.prompt import classify_tokens, load_lexicon, load_prompt_spec
from ast_attn.sketch import load_sketch, to_latent

DATA = Path(__file__).parent / "data"


def show(name, m):
    print(name)
    for row in m:
        print("  " + "".join("#" if v else "." for v in row))


spec = classify_tokens(load_prompt_spec(DATA / "two_objects.txt"), load_lexicon(DATA / "lexicon.txt"))
print("words  :", spec.token_words())
print("classes:", [c.value for c in spec.token_classes])

# the 32x32 sketch is pooled to an 8x8 latent by majority vote
sketch = to_latent(load_sketch(DATA / "sketch.pgm"), 8, 8)
ids = np.zeros(sketch.hw, dtype=int)
for k, m in enumerate(sketch.flat_masks(), 1):
    ids[m] = k
print("latent instance ids:")
print(ids.reshape(8, 8))

mask = assemble(spec, sketch)
show("T2T (text queries x text keys)", mask.t2t.data)
show("I2T, first 16 pixels (rows) x 9 tokens", mask.i2t.data[:16])

g = build_sensitivity(sketch)
print("g_text per pixel:")
print(np.round(g.g_text.reshape(8, 8), 3))
print("g_image per pixel:")
print(np.round(g.g_image.reshape(8, 8), 3))
# the larger ball region gets a smaller, even negative, text sensitivity
