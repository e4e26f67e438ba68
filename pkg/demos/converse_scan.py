"""Entropy of the first message bit of random linear codes, k = 1..10, length 10."""

from polarmix import channel as ch
from polarmix.converse import sharp_transition_scan

for name, W in (("bsc(0.11)", ch.bsc(0.11)), ("bec(0.5)", ch.bec(0.5))):
    scan = sharp_transition_scan(W, 10, range(1, 11), 20, seed=1)
    print(name)
    print(scan.to_csv(), end="")
