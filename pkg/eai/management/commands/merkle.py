from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from django.core.management.base import CommandError

from eai.management.base import VALIDATION_EXIT, EaiCommand, required_path
from eai.services.ingest import Address, AddressRole, load_address_list
from eai.services.merkle_registry import (
    MerkleProof,
    build_registry,
    load_registry,
    prove,
    root_path,
    save_registry,
    update_registry,
    verify,
)
from eai.services.pipeline import ProximityPipeline, RunConfig


class Command(EaiCommand):
    help = "Commit the EAI set to a Merkle root, issue membership proofs and verify them."
    actions = {
        "build": "Build a registry from an address list or from computed distances (d <= 1).",
        "prove": "Emit the membership proof JSON for one address.",
        "verify": "Check a proof JSON against a root.",
    }

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--addresses", type=str, default="", help="Address list to commit (build).")
        parser.add_argument("--transfers", type=str, default=None, help="Derive the EAI set from transfers (build).")
        parser.add_argument("--graph", type=str, default=None, help="Derive the EAI set from a graph cache (build).")
        parser.add_argument("--exchanges", type=str, default=None, help="Exchange list for deriving the EAI set.")
        parser.add_argument("--exclusions", type=str, default=None, help="Exchange exclusions.")
        parser.add_argument("--add", type=str, default="", help="Address list to add to --registry (build).")
        parser.add_argument("--remove", type=str, default="", help="Address list to remove from --registry (build).")
        parser.add_argument("--registry", type=str, default="", help="Registry file (sorted addresses).")
        parser.add_argument("--address", type=str, default="", help="Address to prove.")
        parser.add_argument("--proof", type=str, default="", help="Proof JSON file (verify).")
        parser.add_argument("--root", type=str, default="", help="Root hex to verify against.")
        parser.add_argument("--merkle-hash", type=str, default=None, help="keccak256 (default) or sha256.")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        if action == "build":
            self._build(config, options)
        elif action == "prove":
            registry = load_registry(required_path(options, "registry"), config.merkle_hash)
            address = str(options.get("address") or "").strip()
            if not address:
                raise ValueError("--address is required")
            proof = prove(registry, Address.parse(address))
            self.emit(json.dumps(proof.to_dict(), indent=2) + "\n", options)
        else:
            self._verify(config, options)

    def _build(self, config: RunConfig, options: dict[str, Any]) -> None:
        out = required_path(options, "out")
        base = str(options.get("registry") or "").strip()
        if base:
            registry = update_registry(
                load_registry(Path(base), config.merkle_hash),
                add=self._optional_list(options, "add"),
                remove=self._optional_list(options, "remove"),
            )
        elif str(options.get("addresses") or "").strip():
            registry = build_registry(
                load_address_list(required_path(options, "addresses"), AddressRole.EAI),
                config.merkle_hash,
            )
        else:
            result = ProximityPipeline(config).run(need_records=False)
            registry = build_registry(result.distances.eai_addresses(), config.merkle_hash)
        save_registry(registry, out)
        self.stdout.write(
            self.style.SUCCESS(
                f"Registry {out}: leaves={len(registry)} depth={registry.depth} root={registry.root_hex}"
            )
        )

    def _verify(self, config: RunConfig, options: dict[str, Any]) -> None:
        proof_path = required_path(options, "proof")
        proof = MerkleProof.from_dict(json.loads(proof_path.read_text(encoding="utf-8")))
        root = str(options.get("root") or "").strip()
        registry = str(options.get("registry") or "").strip()
        if not root and registry:
            root = root_path(Path(registry)).read_text(encoding="utf-8").strip()
        if not root and proof.root is not None:
            root = "0x" + proof.root.hex()
        if not root:
            raise ValueError("--root or --registry is required")
        if not verify(root, proof, config.merkle_hash):
            self.stdout.write("invalid")
            raise CommandError(f"proof for {proof.address} does not verify against {root}", returncode=VALIDATION_EXIT)
        self.stdout.write(self.style.SUCCESS(f"valid hash_operations={proof.hash_operations}"))

    def _optional_list(self, options: dict[str, Any], name: str) -> list[Address]:
        value = str(options.get(name) or "").strip()
        if not value:
            return []
        return list(load_address_list(Path(value), AddressRole.EAI))
