"""
Quadrature audit trail.

Every constant the CLI publishes is accompanied by the integrals it came
from: split points, per-segment values and error estimates. Entries go to
structlog and, when a file is configured, to a JSON-lines log.
"""
import json
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog

from whitlab.core.elements import QuadResult

logger = structlog.get_logger(__name__)


class QuadratureAudit:
    """
    Collects QuadResult entries and mirrors them to a JSON-lines file.
    """

    def __init__(self, log_file: Optional[str] = None) -> None:
        """
        Initialize the audit trail.

        Args:
            log_file: Path to the JSON-lines file (optional)
        """
        self.log_file = Path(log_file) if log_file else None
        self.entries: List[Dict[str, Any]] = []

        if self.log_file:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            logger.debug("Quadrature audit file enabled", log_file=str(self.log_file))

    def log_result(
        self,
        result: QuadResult,
        context: Optional[Dict[str, Any]] = None
    ) -> Dict[str, Any]:
        """
        Record one integral.

        Args:
            result: Integral with its segments
            context: Extra key-value fields (tolerances, N, ...)

        Returns:
            The entry as stored
        """
        entry = result.to_dict()
        entry["timestamp"] = time.time()
        if context:
            entry["context"] = dict(context)

        self.entries.append(entry)
        logger.info(
            "Integral audited",
            label=result.label,
            value=result.value,
            abserr=result.abserr,
            segments=len(result.segments)
        )

        if self.log_file:
            try:
                with self.log_file.open('a') as f:
                    f.write(json.dumps(entry) + '\n')
            except OSError as e:
                logger.error("Failed to write quadrature audit", error=str(e))

        return entry

