"""Built-in example data: RMRS medical charges for two patient groups.

Log-scale summary statistics of inpatient/outpatient charges for 119 African
American and 106 White patients with type I diabetes, from the Regenstrief
Medical Record System.  Only the published summaries survive, so this is a
summary-level dataset.
"""

from __future__ import annotations

from .model import LOGNORMAL_MEAN, Dataset, SampleSummary

# (label, n, log-scale mean, log-scale variance as published)
RMRS_SUMMARY_ROWS = (
    ("African American", 119, 9.06695, 1.824),
    ("White", 106, 8.69306, 2.629),
)

RMRS_GROUP_LABELS = tuple(row[0] for row in RMRS_SUMMARY_ROWS)


def rmrs_dataset() -> Dataset:
    """The RMRS example as a Dataset under the lognormal-mean model.

    The published log-scale variances use the n divisor; SampleSummary stores
    the unbiased n-1 form, so they are rescaled by n / (n - 1) here.
    """
    groups = tuple(
        SampleSummary(n=n, mean=mean, variance=n / (n - 1) * variance)
        for _, n, mean, variance in RMRS_SUMMARY_ROWS
    )
    return Dataset(groups=groups, model=LOGNORMAL_MEAN)
