"""eTAP: trigger-action rules evaluated over garbled circuits."""
