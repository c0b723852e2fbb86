"""Shared builders for the test suite."""

from datetime import date, timedelta

import numpy as np

from optioncast.market_data import QuoteRecord, SequenceSample

START = date(2021, 1, 4)


def make_record(
    offset=0,
    option_bid=4.9,
    option_ask=5.1,
    stock_bid=99.0,
    stock_ask=101.0,
    strike=80.0,
    implied_vol=0.2,
    rate=0.01,
):
    return QuoteRecord(
        day=START + timedelta(days=offset),
        option_bid=option_bid,
        option_ask=option_ask,
        stock_bid=stock_bid,
        stock_ask=stock_ask,
        strike=strike,
        implied_vol=implied_vol,
        rate=rate,
    )


def make_series(option_mids, spread=0.2, stock_mid=100.0, **kwargs):
    """Constant stock, per-day option mids with a symmetric absolute spread."""
    return [
        make_record(
            offset=k,
            option_bid=mid - spread / 2,
            option_ask=mid + spread / 2,
            stock_bid=stock_mid - 1.0,
            stock_ask=stock_mid + 1.0,
            **kwargs,
        )
        for k, mid in enumerate(option_mids)
    ]


def separable_dataset(n=2000, seed=123, permute=False):
    """Windows whose label is the sign of the feature-9 window mean.

    Feature index 9 gets a +/-1 per-window shift, so thresholding that
    feature's mean at zero classifies every sample correctly by
    construction; the other 12 features are pure noise.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    windows = rng.standard_normal((n, 10, 13))
    shift = rng.choice([-1.0, 1.0], size=n)
    windows[:, :, 9] += shift[:, None]
    means = windows[:, :, 9].mean(axis=1)
    keep = means != 0.0
    windows = windows[keep]
    labels = (means[keep] > 0).astype(int)
    if permute:
        labels = rng.permutation(labels)
    return [
        SequenceSample(window=windows[i], label=int(labels[i]), end_index=i)
        for i in range(len(labels))
    ]
