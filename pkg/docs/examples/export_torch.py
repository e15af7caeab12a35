#!/usr/bin/env python3
"""Export a torch.nn.Sequential of Linear/ReLU layers (optionally ending in
Softmax) to the portable model-artifact format.

Kept outside the package core so the repository never imports torch.
"""

import numpy as np

from chainbound.models import ModelArtifact, save_model


def export_sequential(seq) -> ModelArtifact:
    import torch.nn as nn

    layers = []
    pending = None  # last Linear waiting for its activation
    softmax = False
    for mod in seq:
        if isinstance(mod, nn.Linear):
            if pending is not None:
                layers.append((pending, "linear"))
            pending = (
                mod.weight.detach().numpy().astype(float),
                mod.bias.detach().numpy().astype(float),
            )
        elif isinstance(mod, nn.ReLU):
            if pending is None:
                raise ValueError("ReLU before any Linear layer")
            layers.append((pending, "relu"))
            pending = None
        elif isinstance(mod, nn.Softmax):
            if pending is None:
                raise ValueError("Softmax before any Linear layer")
            layers.append((pending, "softmax"))
            pending = None
            softmax = True
        else:
            raise ValueError(f"unsupported module {type(mod).__name__}")
    if pending is not None:
        layers.append((pending, "linear"))

    raw = {
        "kind": "ReluNetworkSoftmax" if softmax else "ReluNetwork",
        "arity": len(layers[-1][0][1]),
        "params": {
            "layers": [
                {"W": W.tolist(), "b": b.tolist(), "activation": act}
                for (W, b), act in layers
            ]
        },
    }
    return ModelArtifact.from_json_dict(raw)


def main():
    try:
        import torch
        import torch.nn as nn
    except ImportError:
        raise SystemExit("torch is required to run the demo export")

    torch.manual_seed(0)
    net = nn.Sequential(nn.Linear(3, 8), nn.ReLU(), nn.Linear(8, 2), nn.Softmax(dim=-1))
    artifact = export_sequential(net)
    save_model(artifact, "torch_net.json")

    x = np.array([0.1, -0.3, 0.7])
    with torch.no_grad():
        want = net(torch.tensor(x, dtype=torch.float32)).numpy()
    got = artifact.evaluate(x)
    print("torch:", want, "artifact:", got)
    assert np.allclose(want, got, atol=1e-6)
    print("wrote torch_net.json")


if __name__ == "__main__":
    main()
