"""Shared fixtures: synthetic corpora, real-data discovery, and the
acceptance summary printed at the end of a run.

Real TUDataset corpora are looked up under $SPECNET_DATA, falling back
to ./data at the repository root. Tests that need them skip with an
explicit message when the files are absent.
"""

import os
import re

import numpy as np
import pytest

from specnet import autodiff as ad
from specnet.datasets import parse_tudataset, write_tudataset
from specnet.model import DualEmbedding
from specnet.synth import make_synthetic_dataset

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

REAL_DATASETS = ("PROTEINS", "Mutagenicity", "NCI1")


def find_data_root():
    env = os.environ.get("SPECNET_DATA")
    for candidate in ([env] if env else []) + [os.path.join(REPO_ROOT, "data")]:
        if candidate and os.path.isdir(candidate):
            return candidate
    return None


def dataset_available(root, name):
    if root is None:
        return False
    for place in (os.path.join(root, name), root):
        if os.path.exists(os.path.join(place, f"{name}_A.txt")):
            return True
    return False


def require_dataset(name):
    """The parsed real dataset, or a skip naming what is missing."""
    root = find_data_root()
    if not dataset_available(root, name):
        pytest.skip(
            f"real dataset {name} not available; set SPECNET_DATA or place "
            f"TUDataset files under ./data"
        )
    return parse_tudataset(root, name)


def unit_vector(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.sqrt(v @ v)


def random_embedding(rng, dim=64):
    """A constant (tape-less) dual embedding with unit-norm components."""
    return DualEmbedding(low=ad.Tensor(unit_vector(rng, dim)),
                         high=ad.Tensor(unit_vector(rng, dim)))


@pytest.fixture(scope="session")
def synth_ds():
    return make_synthetic_dataset(60, seed=7)


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """A synthetic dataset written to disk in TUDataset format."""
    ds = make_synthetic_dataset(48, seed=11, name="SynthCorpus")
    root = tmp_path_factory.mktemp("corpus")
    write_tudataset(str(root), ds.name, ds.graphs)
    return str(root), ds


# ---------------------------------------------------------------------------
# Acceptance summary
# ---------------------------------------------------------------------------

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = {}
    for status, verdict in (("passed", "PASS"), ("failed", "FAIL"),
                            ("skipped", "SKIP"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            m = _CRITERION.search(nodeid)
            if not m:
                continue
            number = int(m.group(1))
            label = m.group(2).replace("_", "-")
            note = ""
            if verdict == "SKIP":
                reason = ""
                if isinstance(rep.longrepr, tuple):
                    reason = rep.longrepr[2]
                note = f" ({reason.removeprefix('Skipped: ')})" if reason else ""
            rows[number] = (label, verdict, note)
    if not rows:
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for number in sorted(rows):
        label, verdict, note = rows[number]
        tw.write_line(f"criterion {number:2d} {label:<24s} {verdict}{note}")
