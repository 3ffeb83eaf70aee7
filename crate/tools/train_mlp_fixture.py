"""Train the 3-64-64-3 tanh multiplier network used as a test fixture.

Reads a dataset written by `fene gen_dataset` (CSV plus JSON sidecar) and
writes a weight file in the format read by `nn_load`, including 100 probes.

    python tools/train_mlp_fixture.py data.csv weights.json
"""

import argparse
import json
from pathlib import Path

import numpy as np
import torch

torch.set_default_dtype(torch.float64)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("dataset", type=Path)
    ap.add_argument("output", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--lbfgs-iters", type=int, default=4000)
    ap.add_argument("--probes", type=int, default=100)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)
    data = np.loadtxt(args.dataset, delimiter=",", skiprows=1)
    meta = json.loads(args.dataset.with_suffix(".json").read_text())
    perm = rng.permutation(len(data))
    n_val = len(data) // 10
    val, train = data[perm[:n_val]], data[perm[n_val:]]

    x_mean, x_std = train[:, :3].mean(0), train[:, :3].std(0)
    y_mean, y_std = train[:, 3:].mean(0), train[:, 3:].std(0)

    def split(d):
        x = torch.tensor((d[:, :3] - x_mean) / x_std)
        y = torch.tensor((d[:, 3:] - y_mean) / y_std)
        return x, y

    xt, yt = split(train)
    xv, yv = split(val)
    net = torch.nn.Sequential(
        torch.nn.Linear(3, 64), torch.nn.Tanh(),
        torch.nn.Linear(64, 64), torch.nn.Tanh(),
        torch.nn.Linear(64, 3),
    )
    mse = torch.nn.MSELoss()

    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    for epoch in range(args.epochs):
        order = torch.randperm(len(xt))
        for k in range(0, len(xt), args.batch):
            idx = order[k:k + args.batch]
            opt.zero_grad()
            loss = mse(net(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
        sched.step()
        if epoch % 100 == 0:
            with torch.no_grad():
                print(f"adam {epoch}: train {mse(net(xt), yt).item():.3e}", flush=True)

    lbfgs = torch.optim.LBFGS(
        net.parameters(), lr=1.0, max_iter=args.lbfgs_iters, tolerance_grad=1e-8,
        tolerance_change=1e-14, history_size=50, line_search_fn="strong_wolfe",
    )

    def closure():
        lbfgs.zero_grad()
        loss = mse(net(xt), yt)
        loss.backward()
        return loss

    lbfgs.step(closure)
    with torch.no_grad():
        train_mse = mse(net(xt), yt).item()
        val_mse = mse(net(xv), yv).item()
        # mean squared error in physical units
        val_pred = net(xv).numpy() * y_std + y_mean
        val_mse_phys = float(np.mean((val_pred - val[:, 3:]) ** 2))
    print(f"lbfgs: train {train_mse:.3e} val {val_mse:.3e} val (unscaled) {val_mse_phys:.3e}")

    probe_x = val[: args.probes, :3]
    with torch.no_grad():
        probe_y = net(torch.tensor((probe_x - x_mean) / x_std)).numpy() * y_std + y_mean
    linears = [m for m in net if isinstance(m, torch.nn.Linear)]
    out = {
        "arch": [3, 64, 64, 3],
        "activation": "tanh",
        "layers": [
            {"weight": m.weight.detach().numpy().tolist(), "bias": m.bias.detach().numpy().tolist()}
            for m in linears
        ],
        "input_mean": x_mean.tolist(),
        "input_std": x_std.tolist(),
        "output_mean": y_mean.tolist(),
        "output_std": y_std.tolist(),
        "probes": [{"input": a.tolist(), "output": b.tolist()} for a, b in zip(probe_x, probe_y)],
        "provenance": {
            "b": meta["b"],
            "dataset_id": meta["dataset_id"],
            "seed": args.seed,
            "adam_epochs": args.epochs,
            "train_mse_scaled": train_mse,
            "val_mse_scaled": val_mse,
            "val_mse": val_mse_phys,
            "torch": torch.__version__,
        },
    }
    args.output.write_text(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
