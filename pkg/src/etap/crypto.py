"""Hashing, authenticated encryption, HMAC and key derivation.

* ``hash``: SHAKE-128 squeezed to 16 bytes.
* AEAD: AES-128-CBC with PKCS#7 padding, then HMAC-SHA256 over ``iv || body``
  (encrypt-then-MAC).  The 16-byte key is expanded into separate encryption
  and MAC keys.  Wire layout of a ciphertext is ``iv(16) || body || tag(32)``.
"""
from __future__ import annotations

import hashlib
import hmac as _hmac
import os
from dataclasses import dataclass
from typing import NamedTuple, Protocol

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_BYTES = 16
IV_BYTES = 16
TAG_BYTES = 32


class DecryptionError(Exception):
    """MAC check failed, the ciphertext is malformed, or the key is wrong."""


class RandomSource(Protocol):
    def randbytes(self, n: int) -> bytes: ...


class _OsRandom:
    def randbytes(self, n: int) -> bytes:
        return os.urandom(n)


SYSTEM_RANDOM: RandomSource = _OsRandom()


def hash(data: bytes) -> bytes:  # noqa: A001 - mirrors the protocol's H
    return hashlib.shake_128(data).digest(KEY_BYTES)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("xor of unequal lengths")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def generate_key(rng: RandomSource = SYSTEM_RANDOM) -> bytes:
    return rng.randbytes(KEY_BYTES)


@dataclass(frozen=True)
class Ciphertext:
    iv: bytes
    body: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return self.iv + self.body + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if len(data) < IV_BYTES + 16 + TAG_BYTES or (len(data) - IV_BYTES - TAG_BYTES) % 16:
            raise DecryptionError("malformed ciphertext length")
        return cls(data[:IV_BYTES], data[IV_BYTES:-TAG_BYTES], data[-TAG_BYTES:])

    def __len__(self) -> int:
        return len(self.iv) + len(self.body) + len(self.tag)


def _split_key(key: bytes) -> tuple[bytes, bytes]:
    if len(key) != KEY_BYTES:
        raise ValueError(f"AEAD key must be {KEY_BYTES} bytes")
    material = hashlib.shake_128(b"etap-aead\x00" + key).digest(2 * KEY_BYTES)
    return material[:KEY_BYTES], material[KEY_BYTES:]


def aead_encrypt(key: bytes, plaintext: bytes, rng: RandomSource = SYSTEM_RANDOM) -> Ciphertext:
    enc_key, mac_key = _split_key(key)
    iv = rng.randbytes(IV_BYTES)
    padder = padding.PKCS7(128).padder()
    padded = padder.update(plaintext) + padder.finalize()
    encryptor = Cipher(algorithms.AES(enc_key), modes.CBC(iv)).encryptor()
    body = encryptor.update(padded) + encryptor.finalize()
    tag = _hmac.new(mac_key, iv + body, hashlib.sha256).digest()
    return Ciphertext(iv, body, tag)


def aead_decrypt(key: bytes, ct: Ciphertext | bytes) -> bytes:
    """Verify the MAC, then decrypt.  Raises :class:`DecryptionError`."""
    if isinstance(ct, (bytes, bytearray)):
        ct = Ciphertext.from_bytes(bytes(ct))
    enc_key, mac_key = _split_key(key)
    expected = _hmac.new(mac_key, ct.iv + ct.body, hashlib.sha256).digest()
    if not _hmac.compare_digest(expected, ct.tag):
        raise DecryptionError("authentication failed")
    if len(ct.iv) != IV_BYTES or not ct.body or len(ct.body) % 16:
        raise DecryptionError("malformed ciphertext")
    decryptor = Cipher(algorithms.AES(enc_key), modes.CBC(ct.iv)).decryptor()
    padded = decryptor.update(ct.body) + decryptor.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as exc:
        raise DecryptionError("bad padding") from exc


def hmac(key: bytes, data: bytes) -> bytes:
    return _hmac.new(key, data, hashlib.sha256).digest()


def hmac_verify(key: bytes, data: bytes, tag: bytes) -> bool:
    return _hmac.compare_digest(hmac(key, data), tag)


class EncodingMaterial(NamedTuple):
    seed: bytes      # e_s
    offset: bytes    # e_r, lsb forced to 1
    payload_key: bytes  # k_v


def derive_encoding(k_trigger: bytes, circuit_id: int) -> EncodingMaterial:
    """Per-circuit encoding seed, free-XOR offset and payload key from ``k_T``."""
    if len(k_trigger) != KEY_BYTES:
        raise ValueError("k_T must be 16 bytes")
    prefix = k_trigger + (circuit_id & 0xFFFFFFFF).to_bytes(4, "big")
    seed = hash(prefix + b"\x00")
    offset = bytearray(hash(prefix + b"\x01"))
    offset[-1] |= 1
    payload_key = hash(prefix + b"\x02")
    return EncodingMaterial(seed, bytes(offset), payload_key)


def derive_api_key(k_service: bytes, api_url: str) -> bytes:
    """API-level key from a service-level key and the API URL."""
    return hash(k_service + api_url.encode("utf-8"))[:KEY_BYTES]


def derive_rule_key(k_trigger: bytes, rule_id: str) -> bytes:
    """Per-rule encoding key under a shared API key.

    Rules that share a trigger API share ``k_T`` but count circuit ids
    independently; keying the encoding per rule keeps ``(key, j)`` unique.
    """
    return hash(k_trigger + b"rule\x00" + rule_id.encode("utf-8"))
