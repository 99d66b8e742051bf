"""Line-delimited JSON oracle server.

One request object per stdin line, one response object per stdout line,
in order.  Request: {"v": 1, "id", "dataset", "size", "emd", "seed",
"epochs"?}.  Response: {"id", "accuracy", "achieved_emd", "wall_time",
"arch"} on success, {"id", "error"} otherwise.  `--batch IN OUT` reads
requests from a file and writes responses to a file instead.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .datasets import DatasetUnavailable, load_dataset
from .model import train_and_eval
from .partition import PartitionError, label_emd, partition

PROTOCOL_VERSION = 1
ARCH = "conv16-conv32-fc128-fc64"
KNOWN_DATASETS = ("mnist", "fashion-mnist", "emnist", "synthetic")


def handle_request(obj: dict, data_root: str = "data") -> dict:
    rid = obj.get("id")
    try:
        if obj.get("v") != PROTOCOL_VERSION:
            raise ValueError(f"unsupported protocol version {obj.get('v')!r}")
        dataset = obj["dataset"]
        if dataset not in KNOWN_DATASETS:
            raise ValueError(f"unknown dataset {dataset!r}")
        size = int(obj["size"])
        emd = float(obj["emd"])
        seed = int(obj.get("seed", 0))
        epochs = int(obj.get("epochs", 5))
        if size < 0:
            raise ValueError("size must be >= 0")
        if not 0.0 <= emd <= 2.0:
            raise ValueError("emd must be in [0, 2]")

        start = time.monotonic()
        train_x, train_y, test_x, test_y = load_dataset(dataset, root=data_root)
        if size == 0:
            achieved = 0.0
            accuracy = train_and_eval(train_x[:0], train_y[:0], test_x, test_y, seed=seed)
        else:
            idx = partition(train_y.numpy(), size, emd, seed)
            achieved = label_emd(train_y.numpy()[idx], n_classes=10)
            accuracy = train_and_eval(
                train_x[idx], train_y[idx], test_x, test_y, epochs=epochs, seed=seed
            )
        return {
            "id": rid,
            "accuracy": accuracy,
            "achieved_emd": achieved,
            "wall_time": time.monotonic() - start,
            "arch": ARCH,
            "epochs": epochs,
        }
    except (KeyError, TypeError, ValueError, PartitionError, DatasetUnavailable) as exc:
        return {"id": rid, "error": f"{type(exc).__name__}: {exc}"}


def serve(lines, out, data_root: str = "data") -> None:
    for line in lines:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("request must be an object")
        except ValueError as exc:
            response = {"id": None, "error": f"malformed request: {exc}"}
        else:
            response = handle_request(obj, data_root=data_root)
        out.write(json.dumps(response) + "\n")
        out.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-root", default="data", help="dataset download/cache directory")
    parser.add_argument("--batch", nargs=2, metavar=("IN", "OUT"),
                        help="read requests from IN, write responses to OUT, then exit")
    args = parser.parse_args(argv)
    if args.batch:
        with open(args.batch[0]) as f, open(args.batch[1], "w") as g:
            serve(f, g, data_root=args.data_root)
    else:
        serve(sys.stdin, sys.stdout, data_root=args.data_root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
