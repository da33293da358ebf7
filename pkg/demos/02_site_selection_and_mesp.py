"""Choosing monitoring sites.

Sites are ranked by the number of observed weeks, a geographically spread
subset is picked by farthest-point greedy selection, and the covariance of
that subset feeds a maximum-entropy subset search whose greedy/interchange
answer is checked against brute force.
"""

import itertools
import tempfile
from pathlib import Path

import numpy as np

from mesgencov.cli import main as cli
from mesgencov.mespcheck import MespInstance, greedy_interchange, logdet_subset
from mesgencov.pipeline import Dataset, GetCovConfig, get_cov
from mesgencov.siteselect import SiteQuery, get_sites, max_dist_sites

with tempfile.TemporaryDirectory() as tmp:
    data_dir = Path(tmp) / "data"
    cli(["synth", "--seed", "11", "--sites", "12", "--months", "48", "--missing-rate", "0.3",
         "--out-dir", str(data_dir)])
    data = Dataset.from_dir(data_dir)

    query = SiteQuery("01/01/83 00:00", "12/31/86 00:00", 6, 100, "SO4")
    busiest = get_sites(query, data.weekly)
    print("most observed sites:", busiest.final_list)

    spread = max_dist_sites(query, data.weekly, data.meta)
    print("spread-out sites:   ", spread.final_list)

    cfg = GetCovConfig(use36=False, site_add=spread.final_list).validate()
    C = get_cov(cfg, data).cov

    s = 3
    subset, value = greedy_interchange(MespInstance(C, s))
    best = max(itertools.combinations(range(len(C)), s), key=lambda S: logdet_subset(C, list(S)))
    print(f"\ngreedy/interchange subset {subset}: log det {value:.4f}")
    print(f"brute-force optimum      {list(best)}: log det {logdet_subset(C, list(best)):.4f}")
