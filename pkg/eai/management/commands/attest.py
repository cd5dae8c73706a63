from __future__ import annotations

import json
from datetime import timezone
from pathlib import Path
from typing import Any

from dateutil import parser as date_parser
from django.core.management.base import CommandError

from eai.config import settings
from eai.management.base import VALIDATION_EXIT, EaiCommand, required_path
from eai.services.attestation import (
    Attestation,
    AttestationStatus,
    SignerIdentity,
    sign_attestation,
    verify_attestation,
)
from eai.services.ingest import Address
from eai.services.merkle_registry import load_registry
from eai.services.pipeline import RunConfig


class Command(EaiCommand):
    help = "Off-chain registry attestations: create a signer key, sign and verify EAI statements."
    actions = {
        "keygen": "Generate an Ed25519 signer key (32-byte seed hex, mode 0600).",
        "sign": "Sign an expiring EAI attestation for one address.",
        "verify": "Verify an attestation JSON: valid, expired or bad_signature.",
    }

    def add_command_arguments(self, parser) -> None:
        parser.add_argument("--key", dest="signer_key_path", type=str, default=None, help="Signer key file.")
        parser.add_argument("--public-key", type=str, default="", help="Signer public key hex (verify).")
        parser.add_argument("--address", type=str, default="", help="Address to attest.")
        parser.add_argument("--status", type=str, default="", help="eai or not-eai; omitted means registry membership.")
        parser.add_argument("--registry", type=str, default="", help="Registry file deciding the status (sign).")
        parser.add_argument("--ttl", dest="attestation_ttl_seconds", type=int, default=None, help="Lifetime in seconds.")
        parser.add_argument("--nonce", type=int, default=None, help="64-bit nonce; random when omitted.")
        parser.add_argument("--now", type=str, default="", help="Clock override: unix seconds or ISO-8601.")
        parser.add_argument("--attestation", type=str, default="", help="Attestation JSON file (verify).")

    def run(self, action: str, config: RunConfig, options: dict[str, Any]) -> None:
        if action == "keygen":
            self._keygen(config, options)
        elif action == "sign":
            self._sign(config, options)
        else:
            self._verify(config, options)

    def _keygen(self, config: RunConfig, options: dict[str, Any]) -> None:
        out = str(options.get("out") or "").strip()
        path = Path(out) if out else config.signer_key_path
        if path is None:
            raise ValueError("--out or EAI_SIGNER_KEY_PATH is required")
        signer = SignerIdentity.generate()
        signer.save(path)
        self.stdout.write(
            self.style.SUCCESS(
                f"Signer key written to {path}: public_key={signer.public_key_hex} fingerprint={signer.fingerprint}"
            )
        )

    def _sign(self, config: RunConfig, options: dict[str, Any]) -> None:
        signer = self._signer(config)
        address = Address.parse(str(options.get("address") or "").strip() or _missing("address"))
        status = str(options.get("status") or "").strip().lower()
        if status:
            if status not in {"eai", "not-eai"}:
                raise ValueError("--status must be eai or not-eai")
            is_eai = status == "eai"
        else:
            registry = load_registry(required_path(options, "registry"), config.merkle_hash)
            is_eai = address in registry
        attestation = sign_attestation(
            signer,
            address,
            is_eai,
            config.attestation_ttl_seconds,
            options.get("nonce"),
            now=_parse_now(str(options.get("now") or "")),
        )
        self.emit(json.dumps(attestation.to_dict(), indent=2) + "\n", options)

    def _verify(self, config: RunConfig, options: dict[str, Any]) -> None:
        public_key = str(options.get("public_key") or "").strip()
        if not public_key:
            public_key = self._signer(config).public_key_hex
        payload = json.loads(required_path(options, "attestation").read_text(encoding="utf-8"))
        attestation = Attestation.from_dict(payload)
        status = verify_attestation(public_key, attestation, _parse_now(str(options.get("now") or "")))
        if status is not AttestationStatus.VALID:
            self.stdout.write(status.value)
            raise CommandError(f"attestation for {attestation.address} is {status.value}", returncode=VALIDATION_EXIT)
        self.stdout.write(self.style.SUCCESS(f"{status.value} is_eai={str(attestation.is_eai).lower()}"))

    def _signer(self, config: RunConfig) -> SignerIdentity:
        path = config.signer_key_path or settings.eai_signer_key_path
        if path is None:
            raise ValueError("--key or EAI_SIGNER_KEY_PATH is required")
        return SignerIdentity.load(path)


def _parse_now(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    if text.isdigit():
        return int(text)
    moment = date_parser.isoparse(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def _missing(name: str) -> str:
    raise ValueError(f"--{name} is required")
