"""Run the toy transformer with the step-layer schedule and compare against no tuning."""

from pathlib import Path

import numpy as np

from ast_attn.analysis import extract_regions, layer_range_stats
from ast_attn.masks import assemble, build_sensitivity
from ast_attn.mini_dit import MiniDitConfig, init_model, run
from ast_attn.prompt import classify_tokens, load_lexicon, load_prompt_spec
from ast_attn.schedule import activation_table, builtin_profile
from ast_attn.sketch import load_sketch, to_latent

DATA = Path(__file__).parent / "data"

spec = classify_tokens(load_prompt_spec(DATA / "two_objects.txt"), load_lexicon(DATA / "lexicon.txt"))
sketch = to_latent(load_sketch(DATA / "sketch.pgm"), 8, 8)
mask, g = assemble(spec, sketch), build_sensitivity(sketch)

cfg = MiniDitConfig(d_c=spec.d_c, h=8, w=8, n_double=4, n_single=8, n_steps=8, seed=1)
model = init_model(cfg)
profile = builtin_profile("toy-12", n_steps=8)
print(profile)

# which layers are live at step 0, one letter per I2T class plus T2T / I2I
for layer, row in enumerate(activation_table(profile), 1):
    act = row[0]
    tags = "".join(c.value[0].upper() for c in sorted(act.i2t_classes, key=lambda c: c.value))
    print(f"layer {layer:2d}: i2t={tags:<3} regions={sorted(r.value for r in act.regions)}")

tuned = run(model, spec, mask, g, profile, capture=True)
plain = run(model, spec, capture=True)

for k, tok in enumerate([1, 3]):
    inside = sketch.masks[k].ravel()
    for name, res in (("tuned", tuned), ("plain", plain)):
        vals = [extract_regions(c.attention, spec.d_c, 64).i2t[inside, tok].mean() for c in res.captures]
        print(f"{spec.token_words()[tok]:>5} {name}: mean in-sketch I2T = {np.mean(vals):.4f}")

for s in layer_range_stats(tuned.captures, [(1, 4), (5, 8), (9, 12)], spec):
    print(f"layers {s.label:>5} {s.token_class.value:<10} mean={s.mean:.4f} max={s.max:.4f}")
