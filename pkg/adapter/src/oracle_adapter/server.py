"""Lock-step stdio server for the latent-query wire protocol.

Invocation: oracle-adapter CONFIG.json (or python -m oracle_adapter ...).

Protocol, one JSON object per line:
  greeting   {"proto": 1, "k": k, "K": K, "d": d}     (d = 0 unless trusted)
  request    {"id": n, "latent": [k floats]}
  response   {"id": n, "confidence": [K floats], "feature": [d floats]?}
  shutdown   {"id": -1} -> exit 0

Malformed requests and model failures produce {"id": ..., "error": ...}
lines and keep the connection alive. Confidence vectors are validated
(nonnegative, sum 1 within 1e-6) before emission; a violating model turns
into an error line, never a silently renormalized response.
"""

import json
import sys

import numpy as np

from .models import load_model

PROTO_VERSION = 1


class AdapterConfig:
    def __init__(self, raw):
        try:
            self.k = int(raw["k"])
            self.num_classes = int(raw["K"])
            self.feature_dim = int(raw.get("d", 0))
            self.trusted_evaluation = bool(raw.get("trusted_evaluation", False))
            self.model = str(raw["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad adapter config: {exc}") from exc
        if self.k < 1 or self.num_classes < 1 or self.feature_dim < 0:
            raise ValueError("adapter config needs k, K >= 1 and d >= 0")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls(json.load(fh))


def _emit(obj, out):
    out.write(json.dumps(obj) + "\n")
    out.flush()


def _error(req_id, message, out):
    _emit({"id": req_id, "error": str(message)}, out)


def serve(config, model_callable, stdin=None, stdout=None):
    """Answer requests until a shutdown line or EOF. Returns the exit code."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    announced_d = config.feature_dim if config.trusted_evaluation else 0
    _emit(
        {"proto": PROTO_VERSION, "k": config.k, "K": config.num_classes, "d": announced_d},
        stdout,
    )
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            req_id = int(req["id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            _error(None, f"malformed request line: {line[:120]}", stdout)
            continue
        if req_id == -1:
            return 0
        try:
            latent = np.asarray(req["latent"], dtype=np.float64)
            if latent.shape != (config.k,):
                raise ValueError(
                    f"latent has shape {latent.shape}, adapter serves k={config.k}"
                )
            if not np.isfinite(latent).all():
                raise ValueError("latent contains non-finite entries")
            confidence, feature = model_callable(latent)
            confidence = np.asarray(confidence, dtype=np.float64)
            if confidence.shape != (config.num_classes,):
                raise ValueError(
                    f"model produced {confidence.shape} confidences, "
                    f"expected ({config.num_classes},)"
                )
            if (confidence < 0).any() or not np.isfinite(confidence).all():
                raise ValueError("model produced negative or non-finite confidences")
            if abs(float(confidence.sum()) - 1.0) > 1e-6:
                raise ValueError(
                    f"model confidences sum to {confidence.sum():.8f}, expected 1"
                )
        except (KeyError, TypeError, ValueError) as exc:
            _error(req_id, exc, stdout)
            continue
        response = {"id": req_id, "confidence": confidence.tolist()}
        if config.trusted_evaluation and feature is not None:
            response["feature"] = np.asarray(feature, dtype=np.float64).tolist()
        _emit(response, stdout)
    return 0


def main(argv=None):
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 1:
        print("usage: oracle-adapter CONFIG.json", file=sys.stderr)
        return 2
    try:
        config = AdapterConfig.from_file(argv[0])
        model = load_model(
            config.model, config.k, config.num_classes, config.feature_dim
        )
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"oracle-adapter: {exc}", file=sys.stderr)
        return 2
    return serve(config, model)


if __name__ == "__main__":
    sys.exit(main())
