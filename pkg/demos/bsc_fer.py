"""Build a rate-0.30 code of length 1024 for BSC(0.11) and measure its FER."""

from polarmix import channel as ch
from polarmix.construct import SelectorParams, build_plan
from polarmix.sim import SimConfig, simulate

W = ch.bsc(0.11)
plan = build_plan(W, 2, 10, Q=256, seed=7, selector=SelectorParams(dimension=307))
rep = simulate(SimConfig(plan, W, 2000, seed=7, tie_break="random"))
print(f"N={plan.N} K={plan.K} rate={rep.rate:.4f}")
print(f"FER={rep.fer:.4f} +- {rep.stderr():.4f}  BER={rep.ber:.2e}")
