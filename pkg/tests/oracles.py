"""Independent brute-force reference implementations used only by tests.

Everything here is deliberately scalar and simple-minded: plain Python
loops, no numpy, no sharing with the library code paths under test.
"""

from __future__ import annotations


# ---------------------------------------------------------------------------
# filter chain: direct per-stage evaluation over a whole sequence

def filter_chain_reference(xs, dc_num=995, dc_den=1000, lp_d=6):
    def tdiv(a, b):
        q = abs(a) // b
        return q if a >= 0 else -q

    def sat(v):
        return max(-(2**31), min(2**31 - 1, v))

    n = len(xs)
    dc = [0] * n
    prev_x, prev_y = 0, 0
    for i, x in enumerate(xs):
        y = sat(x - prev_x + tdiv(dc_num * prev_y, dc_den))
        dc[i] = y
        prev_x, prev_y = x, y

    lp = [0] * n
    for i in range(n):
        xd = dc[i - lp_d] if i >= lp_d else 0
        x2d = dc[i - 2 * lp_d] if i >= 2 * lp_d else 0
        y1 = lp[i - 1] if i >= 1 else 0
        y2 = lp[i - 2] if i >= 2 else 0
        lp[i] = sat(2 * y1 - y2 + dc[i] - 2 * xd + x2d)

    out = [0] * n
    prev = 0
    for i in range(n):
        d = sat(lp[i] - prev)
        prev = lp[i]
        out[i] = min(d * d, 2**31 - 1)
    return out


# ---------------------------------------------------------------------------
# matching: exhaustive optimal one-to-one matcher (max TP count)

def best_matching_tp(event_indices, annotation_indices, tolerance):
    """Maximum number of event/annotation pairs within the tolerance."""
    events = sorted(event_indices)
    anns = sorted(annotation_indices)

    best = 0

    def recurse(ei, used, count):
        nonlocal best
        if count + (len(events) - ei) <= best:
            return
        if ei == len(events):
            best = max(best, count)
            return
        recurse(ei + 1, used, count)  # leave this event unmatched
        for ai, a in enumerate(anns):
            if ai not in used and abs(a - events[ei]) <= tolerance:
                recurse(ei + 1, used | {ai}, count + 1)

    recurse(0, frozenset(), 0)
    return best


# ---------------------------------------------------------------------------
# quantized CNN: scalar integer forward pass

def _round_half_away_ratio(value, shift):
    if shift == 0:
        return value
    half = 1 << (shift - 1)
    if value >= 0:
        return (value + half) >> shift
    return -((-value + half) >> shift)


def _sat8(v):
    return max(-128, min(127, v))


def quant_forward_reference(model, q_input):
    """model: ecgnode QModel; q_input: nested list [channels][length] of ints.

    Returns (argmax, list of 5 ints).  Uses only Python ints and the
    published layer semantics.
    """
    x = [list(row) for row in q_input]
    for layer in model.layers:
        if layer.kind == "relu":
            z = layer.output_qparams.zero_point
            x = [[v if v > z else z for v in row] for row in x]
        elif layer.kind == "maxpool1d":
            k, s = layer.kernel, layer.stride
            out_len = (len(x[0]) - k) // s + 1
            x = [[max(row[j * s : j * s + k]) for j in range(out_len)] for row in x]
        elif layer.kind == "conv1d":
            z_in = layer.input_qparams.zero_point
            w = layer.weights.tolist()
            out_len = (len(x[0]) - layer.kernel) // layer.stride + 1
            new = []
            for o in range(layer.out_channels):
                row = []
                for j in range(out_len):
                    acc = 0
                    for c in range(layer.in_channels):
                        for t in range(layer.kernel):
                            acc += (x[c][j * layer.stride + t] - z_in) * w[o][c][t]
                    v = _round_half_away_ratio(acc * layer.requant_multiplier, layer.requant_shift)
                    row.append(_sat8(v + layer.output_qparams.zero_point))
                new.append(row)
            x = new
        elif layer.kind == "fully_connected":
            z_in = layer.input_qparams.zero_point
            w = layer.weights.tolist()
            flat = [v for row in x for v in row]
            new = []
            for o in range(layer.out_channels):
                acc = 0
                for i, v in enumerate(flat):
                    acc += (v - z_in) * w[o][i]
                v = _round_half_away_ratio(acc * layer.requant_multiplier, layer.requant_shift)
                new.append([_sat8(v + layer.output_qparams.zero_point)])
            x = new
        else:
            raise AssertionError(f"unexpected layer kind {layer.kind}")
    outputs = [row[0] for row in x]
    best = 0
    for i in range(1, len(outputs)):
        if outputs[i] > outputs[best]:
            best = i
    return best, outputs


def float_forward_reference(model, frame):
    """Scalar float64 forward pass with dequantized weights."""
    x = [[float(v) for v in frame]]
    for layer in model.layers:
        if layer.kind == "relu":
            x = [[v if v > 0.0 else 0.0 for v in row] for row in x]
        elif layer.kind == "maxpool1d":
            k, s = layer.kernel, layer.stride
            out_len = (len(x[0]) - k) // s + 1
            x = [[max(row[j * s : j * s + k]) for j in range(out_len)] for row in x]
        elif layer.kind == "conv1d":
            w = layer.weights.tolist()
            ws = layer.weight_scale
            out_len = (len(x[0]) - layer.kernel) // layer.stride + 1
            new = []
            for o in range(layer.out_channels):
                row = []
                for j in range(out_len):
                    acc = 0.0
                    for c in range(layer.in_channels):
                        for t in range(layer.kernel):
                            acc += x[c][j * layer.stride + t] * w[o][c][t] * ws
                    row.append(acc)
                new.append(row)
            x = new
        elif layer.kind == "fully_connected":
            w = layer.weights.tolist()
            ws = layer.weight_scale
            flat = [v for row in x for v in row]
            new = []
            for o in range(layer.out_channels):
                acc = 0.0
                for i, v in enumerate(flat):
                    acc += v * w[o][i] * ws
                new.append([acc])
            x = new
    return [row[0] for row in x]
