"""JSON exporter for trade design.

Produces the documents the CLI writes: regions, ICD decompositions,
information structures, strategy profiles and verification reports. The
structure, profile and tremble documents are read back by
``trade_design.documents``.
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..environment import serialize_environment
from ..models import (
    AffineIcd,
    Environment,
    IcdDecomposition,
    InformationStructure,
    PayoffRegion,
    PStar,
    StrategyProfile,
    TrembleSchedule,
    VerificationReport,
)


class JSONExporter:
    """Export trade-design objects as structured JSON."""

    def __init__(self, pretty: bool = True):
        self.pretty = pretty

    def _document(self, kind: str, **body: Any) -> Dict[str, Any]:
        return {
            "version": "1.0.0",
            "generated_at": datetime.now().isoformat(),
            "kind": kind,
            **body,
        }

    def export_environment(self, env: Environment) -> str:
        """Export an environment in the form ``load_environment`` reads."""
        return self._to_json(self._document("environment", **serialize_environment(env)))

    def export_region(self, region: PayoffRegion) -> str:
        """Export one payoff region with its labeled corners.

        The document kind is ``region``; the region's own name is stored
        under ``region`` and vertices as ``[pi_b, pi_s]`` pairs.
        """
        return self._to_json(self._document("region", **self._serialize_region(region)))

    def export_decomposition(self, decomposition: IcdDecomposition) -> str:
        """Export an ICD decomposition as weighted component beliefs."""
        components = [
            {
                "weight": comp.weight,
                "probs": list(comp.belief.weights),
                "support": list(comp.belief.support_values),
                "constant": comp.constant,
            }
            for comp in decomposition.components
        ]
        return self._to_json(
            self._document("icd_decomposition", components=components)
        )

    def export_affine_icd(
        self, witness: AffineIcd, p_star: Optional[PStar] = None, n_points: int = 101
    ) -> str:
        """Export a closed-form affine ICD with a tabulated CDF."""
        data = self._document(
            "affine_icd",
            cost_slope=witness.cost_slope,
            cost_intercept=witness.cost_intercept,
            v_lo=witness.v_lo,
            v_hi=witness.v_hi,
            atom_mass=witness.atom_mass,
            mean=witness.mean,
            cdf=[[v, g] for v, g in witness.sample(n_points)],
        )
        if p_star is not None:
            data["p_star"] = p_star.p_star
            data["pi_us"] = p_star.pi_us
            data["clamped"] = p_star.clamped
        return self._to_json(data)

    def export_structure(self, structure: InformationStructure) -> str:
        """Export a structure with sparse ``[seller, buyer, value_index, prob]`` entries."""
        return self._to_json(
            self._document("structure", **self._serialize_structure(structure))
        )

    def export_profile(
        self,
        profile: StrategyProfile,
        structure: Optional[InformationStructure] = None,
    ) -> str:
        """Export a strategy profile; signal labels are added when known."""
        data = self._document("profile", **self._serialize_profile(profile))
        if structure is not None:
            data["seller_signals"] = list(structure.seller_signals)
            data["buyer_signals"] = list(structure.buyer_signals)
        return self._to_json(data)

    def export_trembles(self, trembles: TrembleSchedule) -> str:
        return self._to_json(
            self._document("trembles", exponents=list(trembles.exponents))
        )

    def export_report(self, report: VerificationReport) -> str:
        """Export a verification report with per-condition gaps."""
        return self._to_json(self._document("report", **self.serialize_report(report)))

    def export_to_file(self, document: str, output_path: Union[str, Path]):
        """Write an exported document to ``output_path``.

        Args:
            document: JSON text from one of the ``export_*`` methods.
            output_path: Destination file path.
        """
        with open(output_path, "w") as f:
            f.write(document)

    def serialize_report(self, report: VerificationReport) -> Dict[str, Any]:
        """Serialize a report to a dictionary."""
        data: Dict[str, Any] = {
            "ok": report.ok,
            "tolerance": report.tolerance,
            "buyer_optimal": report.buyer_optimal,
            "buyer_gap": report.buyer_gap,
            "seller_optimal": report.seller_optimal,
            "seller_gaps": dict(report.seller_gaps),
            "bayes_on_path": report.bayes_on_path,
            "bayes_gap": report.bayes_gap,
        }
        if report.buyer_violation is not None:
            price, signal, gap = report.buyer_violation
            data["buyer_violation"] = {"price": price, "signal": signal, "gap": gap}
        if report.bayes_violation is not None:
            price, signal = report.bayes_violation
            data["bayes_violation"] = {"price": price, "signal": signal}
        if report.price_independent is not None:
            data["price_independent"] = report.price_independent
            data["price_independent_gap"] = report.price_independent_gap
        if report.consistency is not None:
            data["consistency"] = report.consistency
            data["consistency_trace"] = [
                {"n": n, "distance": d} for n, d in report.consistency_trace
            ]
        return data

    def _serialize_region(self, region: PayoffRegion) -> Dict[str, Any]:
        return {
            "region": region.kind,
            "vertices": [[v.pi_b, v.pi_s] for v in region.vertices],
            "labels": dict(region.labels),
        }

    def _serialize_structure(self, structure: InformationStructure) -> Dict[str, Any]:
        entries = [
            [structure.seller_signals[s], structure.buyer_signals[b], int(v), float(p)]
            for (s, b, v), p in np.ndenumerate(structure.joint)
            if p > 0.0
        ]
        return {
            "seller_signals": list(structure.seller_signals),
            "buyer_signals": list(structure.buyer_signals),
            "n_values": structure.n_values,
            "classes": sorted(structure.class_tags),
            "joint": entries,
        }

    def _serialize_profile(self, profile: StrategyProfile) -> Dict[str, Any]:
        return {
            "grid": profile.price_grid.tolist(),
            "sigma": profile.seller_strategy.tolist(),
            "alpha": profile.buyer_strategy.tolist(),
            "beliefs": profile.beliefs.tolist(),
        }

    def _to_json(self, data: Dict[str, Any]) -> str:
        """Convert a Python object to a JSON string."""
        if self.pretty:
            return json.dumps(data, indent=2, default=str)
        return json.dumps(data, default=str)
