"""Per-image metric reports and their CSV serialization."""
import os
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd

from formation.image_formation import as_image
from metrics.full_reference import angular_error, psnr, ssim
from metrics.no_reference import uciqe, uiqm
from metrics.transmission import pcc_transmission
from utils.errors import ParameterError, UndefinedMetricError
from utils.logger import setup_logger

logger = setup_logger(__name__)

CSV_COLUMNS = ["image_id", "psnr", "ssim", "uiqm", "uciqe", "pcc", "angular_error_deg", "error"]
METRIC_COLUMNS = CSV_COLUMNS[1:-1]
MEAN_ROW_ID = "mean"


@dataclass
class MetricReport:
    """Metrics for one image; fields that do not apply stay None."""
    
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    uiqm: Optional[float] = None
    uciqe: Optional[float] = None
    pcc: Optional[float] = None
    angular_error: Optional[float] = None
    
    def to_row(self, image_id: str) -> dict:
        values = asdict(self)
        return {
            "image_id": image_id,
            "psnr": values["psnr"],
            "ssim": values["ssim"],
            "uiqm": values["uiqm"],
            "uciqe": values["uciqe"],
            "pcc": values["pcc"],
            "angular_error_deg": values["angular_error"],
            "error": "",
        }


def error_row(image_id: str, message: str) -> dict:
    """CSV row for an item that failed."""
    row = {column: None for column in CSV_COLUMNS}
    row["image_id"] = image_id
    row["error"] = message
    return row


def evaluate_image(
    enhanced: np.ndarray,
    reference: Optional[np.ndarray] = None,
    t: Optional[np.ndarray] = None,
    depth: Optional[np.ndarray] = None,
    full_reference: bool = True,
    no_reference: bool = True,
    transmission: bool = True,
    pcc_channel: str = "R",
) -> MetricReport:
    """Compute every metric that applies to the available inputs.
    
    Args:
        enhanced: Enhanced image
        reference: Clean reference (enables PSNR, SSIM and angular error)
        t: Estimated transmission maps (with `depth`, enables PCC)
        depth: Ground-truth depth map
        full_reference: Toggle for PSNR/SSIM/angular error
        no_reference: Toggle for UIQM/UCIQE
        transmission: Toggle for PCC
        pcc_channel: Channel of `t` correlated with depth
        
    Returns:
        MetricReport
    """
    enhanced = as_image(enhanced, "enhanced")
    report = MetricReport()
    if full_reference and reference is not None:
        report.psnr = psnr(enhanced, reference)
        try:
            report.ssim = ssim(enhanced, reference)
        except ParameterError as e:
            logger.warning(f"SSIM skipped: {e}")
        try:
            report.angular_error = angular_error(enhanced, reference)
        except UndefinedMetricError as e:
            logger.warning(f"Angular error skipped: {e}")
    if no_reference:
        report.uiqm = uiqm(enhanced)
        report.uciqe = uciqe(enhanced)
    if transmission and t is not None and depth is not None:
        try:
            report.pcc = pcc_transmission(t, depth, pcc_channel)
        except UndefinedMetricError as e:
            logger.warning(f"PCC skipped: {e}")
    return report


def build_report_frame(rows: Iterable[dict]) -> pd.DataFrame:
    """Assemble rows (in order) and append the mean row over successful items."""
    frame = pd.DataFrame(list(rows), columns=CSV_COLUMNS)
    ok = frame[frame["error"].fillna("") == ""]
    mean_row = {"image_id": MEAN_ROW_ID, "error": ""}
    for column in METRIC_COLUMNS:
        values = pd.to_numeric(ok[column], errors="coerce")
        mean_row[column] = values.mean() if values.notna().any() else None
    return pd.concat([frame, pd.DataFrame([mean_row], columns=CSV_COLUMNS)], ignore_index=True)


def write_report(rows: List[dict], path: str) -> pd.DataFrame:
    """Write the metric CSV (rows in the given order plus a mean row)."""
    frame = build_report_frame(rows)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Metric report written: {path} ({len(rows)} item(s))")
    return frame
