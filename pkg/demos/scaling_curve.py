"""Print the amplification curve a*exp(beta*(m-a)) as a small text plot."""

from ast_attn.analysis import scaling_curve

for m in (1, 0):
    print(f"m = {m}")
    for a, v in scaling_curve(4.0, 32, 0, m, samples=11):
        bar = "*" * int(round(v * 10))
        print(f"  a={a:.1f} -> {v:7.4f} {bar}")

a, v = scaling_curve(4.0, 32, 0, 1)[20]
print(f"peak region: a={a} gives {v:.6f}")
