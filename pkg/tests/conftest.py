import csv
import os

import pytest

from voxtrait.audio_io import load_wav, resample
from voxtrait.features import FeatureTable, extract_features
from voxtrait.regression import read_ratings_csv
from voxtrait.synth import generate_corpus


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small deterministic synthetic corpus: 6 speakers x 3 sessions."""
    root = tmp_path_factory.mktemp("corpus")
    return generate_corpus(str(root), n_speakers=6, seed=7)


@pytest.fixture(scope="session")
def extracted(corpus):
    """(FeatureTable, RatingTable) extracted from the shared corpus."""
    table = FeatureTable()
    with open(corpus.manifest, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            clip = resample(load_wav(os.path.join(corpus.root, row["path"])))
            table.add(row["speaker_id"], row["session"], extract_features(clip))
    return table, read_ratings_csv(corpus.ratings)
