import numpy as np
import pytest

from otml import data as dt


@pytest.fixture(scope="session")
def digits_idx(tmp_path_factory):
    """The bundled 8x8 digits corpus exported to idx files.

    Serves as the offline stand-in for a real handwritten-digit corpus:
    tests exercise the same idx ingestion path that full-size data would
    take.
    """
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    digits = sklearn_datasets.load_digits()
    # pixel values are 0..16; stretch onto the u8 range the format carries
    images = np.round(digits.images * 15.0).astype(np.uint8)
    root = tmp_path_factory.mktemp("digits")
    images_path = str(root / "digits-images-idx3-ubyte")
    labels_path = str(root / "digits-labels-idx1-ubyte")
    dt.write_idx_images(images_path, images)
    dt.write_idx_labels(labels_path, digits.target)
    return images_path, labels_path


@pytest.fixture(scope="session")
def digits_pools(digits_idx):
    """Disjoint source/target sampling pools over the digits corpus.

    25 points per class go to the source pool, the rest to the target
    pool, mirroring the separate-origin pools of the skew protocol.
    """
    images_path, _ = digits_idx
    ds = dt.load_matrix(images_path)
    assert ds.labels is not None, "sibling label discovery failed"
    rng = np.random.default_rng(12345)
    src_idx, tgt_idx = [], []
    for c in range(ds.class_count):
        pool = np.flatnonzero(ds.labels == c)
        perm = rng.permutation(pool)
        src_idx.append(perm[:25])
        tgt_idx.append(perm[25:])
    src_idx = np.concatenate(src_idx)
    tgt_idx = np.concatenate(tgt_idx)
    source = dt.RawDataset(ds.features[:, src_idx], ds.labels[src_idx])
    target = dt.RawDataset(ds.features[:, tgt_idx], ds.labels[tgt_idx])
    return source, target
