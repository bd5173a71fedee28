"""The .model file: a self-describing binary container for one fitted
pipeline.

Layout: magic ``SBTM``, format version as little-endian u16, a u32
length-prefixed UTF-8 JSON metadata document (pipeline spec, vocabulary,
dims, family, array directory), then the raw numeric payload as
little-endian float64 arrays in the directory's order. Floats never pass
through text, so save -> load -> save is byte-identical and loaded
pipelines predict exactly like the originals.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import IO

import numpy as np

from ..core import DatasetVariant, SentitradeError
from ..features import SvdTransform, TfidfTransform, Vocabulary
from ..models import (
    BinarySvm,
    KMeansParams,
    LogRegParams,
    MnbParams,
    ModelFamily,
    ModelSpec,
    SvmParams,
    TrainedModel,
    Weighting,
)
from .pipeline import FittedPipeline, PipelineSpec, Vectorizer

MAGIC = b"SBTM"
FORMAT_VERSION = 1


class BadMagic(SentitradeError):
    """The file does not start with the model-file magic bytes."""


class VersionUnsupported(SentitradeError):
    """The file declares a format version this code does not read."""


class Truncated(SentitradeError):
    """The file ended before its declared contents."""


def _spec_to_doc(spec: PipelineSpec) -> dict:
    m = spec.model
    return {
        "dataset_variant": spec.dataset_variant.value,
        "vectorizer": spec.vectorizer.value,
        "use_svd": spec.use_svd,
        "svd_k": spec.svd_k,
        "model": {
            "family": m.family.value,
            "C": m.C,
            "gamma": m.gamma,
            "alpha": m.alpha,
            "n_clusters": m.n_clusters,
            "class_weighting": m.class_weighting.value,
            "seed": m.seed,
        },
    }


def _spec_from_doc(doc: dict) -> PipelineSpec:
    m = doc["model"]
    model = ModelSpec(
        family=ModelFamily(m["family"]),
        C=m["C"],
        gamma=m["gamma"],
        alpha=m["alpha"],
        n_clusters=m["n_clusters"],
        class_weighting=Weighting(m["class_weighting"]),
        seed=m["seed"],
    )
    return PipelineSpec(
        dataset_variant=DatasetVariant(doc["dataset_variant"]),
        vectorizer=Vectorizer(doc["vectorizer"]),
        use_svd=doc["use_svd"],
        svd_k=doc["svd_k"],
        model=model,
    )


def _collect_arrays(pipeline: FittedPipeline) -> tuple[list[tuple[str, np.ndarray]], dict]:
    """Every float payload of the pipeline, in the order it is written."""
    arrays: list[tuple[str, np.ndarray]] = [("idf", pipeline.tfidf.idf)]
    extra: dict = {}
    if pipeline.svd is not None:
        arrays.append(("svd_components", pipeline.svd.components))
        arrays.append(("singular_values", pipeline.svd.singular_values))
    params = pipeline.model.params
    if isinstance(params, LogRegParams):
        arrays.append(("weights", params.weights))
        arrays.append(("bias", params.bias))
    elif isinstance(params, MnbParams):
        arrays.append(("log_prior", params.log_prior))
        arrays.append(("log_likelihood", params.log_likelihood))
    elif isinstance(params, SvmParams):
        present = [c for c, b in enumerate(params.binaries) if b is not None]
        extra["svm_classes"] = present
        for c in present:
            binary = params.binaries[c]
            arrays.append((f"svm{c}_support_vectors", binary.support_vectors))
            arrays.append((f"svm{c}_dual_coef", binary.dual_coef))
            arrays.append((f"svm{c}_intercept", np.array([binary.intercept])))
    elif isinstance(params, KMeansParams):
        arrays.append(("centroids", params.centroids))
        extra["cluster_to_class"] = [int(c) for c in params.cluster_to_class]
    else:
        raise TypeError(f"cannot persist params of type {type(params).__name__}")
    return arrays, extra


def save_model(pipeline: FittedPipeline, path) -> None:
    """Write a fitted pipeline to a .model file."""
    vocab = pipeline.tfidf.vocabulary
    arrays, extra = _collect_arrays(pipeline)
    meta = {
        "pipeline": _spec_to_doc(pipeline.spec),
        "family": pipeline.model.spec.family.value,
        "vocabulary": {
            "ngram_range": list(vocab.ngram_range),
            "tokens": vocab.tokens_in_column_order(),
            "document_frequency": [
                vocab.document_frequency[t] for t in vocab.tokens_in_column_order()
            ],
            "n_documents": vocab.n_documents,
        },
        "dims": {
            "n_features": vocab.size,
            "svd_k": None if pipeline.svd is None else pipeline.svd.output_dim,
        },
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "extra": extra,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh: IO[bytes], count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise Truncated(f"model file ended while reading {what}")
    return data


def load_model(path) -> FittedPipeline:
    """Read a .model file back into a fitted pipeline."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagic(f"{Path(path).name}: not a model file (magic {magic!r})")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != FORMAT_VERSION:
            raise VersionUnsupported(f"model format version {version}, this build reads {FORMAT_VERSION}")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for entry in meta["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, count * 8, f"array {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    spec = _spec_from_doc(meta["pipeline"])
    vdoc = meta["vocabulary"]
    tokens = vdoc["tokens"]
    vocab = Vocabulary(
        ngram_range=tuple(vdoc["ngram_range"]),
        token_index={token: col for col, token in enumerate(tokens)},
        document_frequency=dict(zip(tokens, vdoc["document_frequency"])),
        n_documents=vdoc["n_documents"],
    )
    tfidf = TfidfTransform(vocabulary=vocab, idf=arrays["idf"])
    svd = None
    if spec.use_svd:
        components = arrays["svd_components"]
        svd = SvdTransform(
            components=components,
            singular_values=arrays["singular_values"],
            input_dim=components.shape[0],
            output_dim=components.shape[1],
        )

    family = ModelFamily(meta["family"])
    extra = meta.get("extra", {})
    if family is ModelFamily.LOGREG:
        params = LogRegParams(weights=arrays["weights"], bias=arrays["bias"])
    elif family is ModelFamily.MNB:
        params = MnbParams(log_prior=arrays["log_prior"], log_likelihood=arrays["log_likelihood"])
    elif family is ModelFamily.RBF_SVM:
        binaries: list[BinarySvm | None] = [None, None, None]
        for c in extra["svm_classes"]:
            binaries[c] = BinarySvm(
                positive_class=c,
                support_vectors=arrays[f"svm{c}_support_vectors"],
                dual_coef=arrays[f"svm{c}_dual_coef"],
                intercept=float(arrays[f"svm{c}_intercept"][0]),
            )
        params = SvmParams(gamma=spec.model.gamma, binaries=tuple(binaries))
    else:
        params = KMeansParams(
            centroids=arrays["centroids"],
            cluster_to_class=np.array(extra["cluster_to_class"], dtype=int),
        )
    model = TrainedModel(spec=spec.model, params=params)
    return FittedPipeline(spec=spec, tfidf=tfidf, svd=svd, model=model)
