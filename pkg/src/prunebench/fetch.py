"""Populate the dataset cache and check files against their published sizes.

Files are taken from a local directory (``source``) when given, otherwise
downloaded from the mirror URLs below. A file already present with the right
size is left alone, so reruns are no-ops.
"""

from __future__ import annotations

import shutil
import tarfile
import tempfile
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from prunebench.datasets import dataset_dir
from prunebench.errors import DataError, DomainError, IntegrityError


@dataclass(frozen=True)
class FileEntry:
    name: str
    size: int  # published size of the file as stored in the cache
    raw_size: int | None = None  # size after gunzip, for IDX files


_MNIST_RAW = {
    "train-images-idx3-ubyte": 47_040_016,
    "train-labels-idx1-ubyte": 60_008,
    "t10k-images-idx3-ubyte": 7_840_016,
    "t10k-labels-idx1-ubyte": 10_008,
}

MANIFESTS: dict[str, list[FileEntry]] = {
    "mnist": [
        FileEntry("train-images-idx3-ubyte.gz", 9_912_422, _MNIST_RAW["train-images-idx3-ubyte"]),
        FileEntry("train-labels-idx1-ubyte.gz", 28_881, _MNIST_RAW["train-labels-idx1-ubyte"]),
        FileEntry("t10k-images-idx3-ubyte.gz", 1_648_877, _MNIST_RAW["t10k-images-idx3-ubyte"]),
        FileEntry("t10k-labels-idx1-ubyte.gz", 4_542, _MNIST_RAW["t10k-labels-idx1-ubyte"]),
    ],
    "fashion_mnist": [
        FileEntry("train-images-idx3-ubyte.gz", 26_421_880, _MNIST_RAW["train-images-idx3-ubyte"]),
        FileEntry("train-labels-idx1-ubyte.gz", 29_515, _MNIST_RAW["train-labels-idx1-ubyte"]),
        FileEntry("t10k-images-idx3-ubyte.gz", 4_422_102, _MNIST_RAW["t10k-images-idx3-ubyte"]),
        FileEntry("t10k-labels-idx1-ubyte.gz", 5_148, _MNIST_RAW["t10k-labels-idx1-ubyte"]),
    ],
    "cifar10": [FileEntry(f"data_batch_{i}.bin", 30_730_000) for i in range(1, 6)]
    + [FileEntry("test_batch.bin", 30_730_000)],
}

MIRRORS = {
    "mnist": "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "fashion_mnist": "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    "cifar10": "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
}


def _matches(path: Path, entry: FileEntry) -> bool:
    return path.exists() and path.stat().st_size == entry.size


def _check(path: Path, entry: FileEntry) -> None:
    size = path.stat().st_size
    if size != entry.size:
        raise IntegrityError(f"{path}: {size} bytes, expected {entry.size}; "
                             "delete it and fetch again")


def _locate(source: Path, entry: FileEntry) -> Path | None:
    """Find ``entry`` under ``source``, either as named or as its unzipped twin."""
    direct = source / entry.name
    if direct.exists():
        return direct
    if entry.name.endswith(".gz"):
        plain = source / entry.name[:-3]
        if plain.exists():
            return plain
    return None


def _place(src: Path, dest: Path, entry: FileEntry) -> None:
    if src.name == entry.name:
        shutil.copyfile(src, dest)
        _check(dest, entry)
        return
    # uncompressed twin of a .gz entry: store it unzipped under its own name
    if src.stat().st_size != entry.raw_size:
        raise IntegrityError(f"{src}: {src.stat().st_size} bytes, expected {entry.raw_size}")
    shutil.copyfile(src, dest.with_name(src.name))


def _download(url: str, dest: Path) -> None:
    try:
        with urllib.request.urlopen(url, timeout=60) as resp, open(dest, "wb") as out:
            shutil.copyfileobj(resp, out)
    except OSError as exc:
        raise DataError(f"download of {url} failed: {exc}") from exc


def fetch(dataset: str, root=None, source=None, manifest: list[FileEntry] | None = None,
          log=print) -> Path:
    """Make sure every file of ``dataset`` is in the cache; return its directory."""
    if manifest is None:
        if dataset not in MANIFESTS:
            raise DomainError(f"nothing to fetch for dataset {dataset!r}")
        manifest = MANIFESTS[dataset]
    directory = dataset_dir(dataset, root)
    directory.mkdir(parents=True, exist_ok=True)

    missing = []
    for entry in manifest:
        dest = directory / entry.name
        if _matches(dest, entry):
            continue
        if entry.raw_size is not None:
            plain = dest.with_name(entry.name[:-3])
            if plain.exists() and plain.stat().st_size == entry.raw_size:
                continue
        if dest.exists():
            _check(dest, entry)
        missing.append(entry)

    if not missing:
        log(f"{dataset}: cache complete at {directory}")
        return directory

    if source is not None:
        source = Path(source)
        for entry in missing:
            src = _locate(source, entry)
            if src is None:
                raise DataError(f"{entry.name} not found under {source}")
            _place(src, directory / entry.name, entry)
            log(f"{dataset}: copied {src.name}")
        return directory

    mirror = MIRRORS.get(dataset)
    if mirror is None:
        raise DataError(f"no download mirror for {dataset!r}; pass a source directory")
    if dataset == "cifar10":
        with tempfile.TemporaryDirectory() as tmp:
            archive = Path(tmp) / "cifar-10-binary.tar.gz"
            _download(mirror, archive)
            with tarfile.open(archive) as tar:
                for member in tar.getmembers():
                    name = Path(member.name).name
                    if any(e.name == name for e in missing):
                        with tar.extractfile(member) as fh, open(directory / name, "wb") as out:
                            shutil.copyfileobj(fh, out)
    else:
        for entry in missing:
            _download(mirror + entry.name, directory / entry.name)
    for entry in missing:
        _check(directory / entry.name, entry)
        log(f"{dataset}: fetched {entry.name}")
    return directory

