"""What one tuning pass does to a random attention map."""

import numpy as np

from ast_attn.analysis import extract_regions, mean_in_out, token_heatmap
from ast_attn.core import row_softmax
from ast_attn.masks import Region, assemble, build_sensitivity
from ast_attn.prompt import TokenClass, make_prompt_spec
from ast_attn.schedule import Activation
from ast_attn.sketch import rect_sketch
from ast_attn.tuner import beta_at, tune_attention, tune_region

# single row, two keys, one of them masked in
row = tune_region([[0.5, 0.5]], [[1, 0]], 1.0, 1.0)
print("before renorm:", row.round(4), "after:", (row / row.sum()).round(4))

print("beta over 32 steps, lambda=5:")
print(" ".join(f"{beta_at(5.0, 32, s):.3f}" for s in range(0, 32, 4)))

I, B = TokenClass.INSTANCE, TokenClass.BACKGROUND
spec = make_prompt_spec(3, [("cat", 0, 1), ("on grass", 1, 3, True)], {0: I, 1: B, 2: B})
sketch = rect_sketch(6, 6, [(1, 1, 2, 3)])
mask = assemble(spec, sketch)
g = build_sensitivity(sketch)

rng = np.random.default_rng(0)
attn = row_softmax(rng.normal(0, 0.5, (mask.size, mask.size)))
act = Activation(frozenset({Region.T2T, Region.I2I}), frozenset({I, B}))

for step in (0, 8, 16, 24):
    tuned = tune_attention(attn, mask, g, act, 32, step)
    hm = token_heatmap(extract_regions(tuned, 3, 36), 0, 6, 6)
    inside, outside = mean_in_out(hm, sketch.masks[0])
    print(f"step {step:2d}: cat token in/out of sketch = {inside:.4f} / {outside:.4f}")

hm0 = token_heatmap(extract_regions(attn, 3, 36), 0, 6, 6)
print("untuned   : cat token in/out of sketch = %.4f / %.4f" % mean_in_out(hm0, sketch.masks[0]))
print("row sums after tuning:", np.abs(tuned.sum(axis=1) - 1).max())
