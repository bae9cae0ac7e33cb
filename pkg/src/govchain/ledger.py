"""Transactions, mempool admission, proposals and superblock execution.

Execution interprets three transaction kinds natively (transfer, noop,
ballot). Block headers carry flat SHA-256 digests of the post-state, the
transaction list and the receipts instead of Merkle tries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional

from .codec import ZERO_DIGEST, KeyRing, digest, encode
from .consensus import Proposal, Superblock

TRANSFER = "transfer"
NOOP = "noop"
BALLOT = "ballot"
TX_KINDS = (TRANSFER, NOOP, BALLOT)

APPLIED = "applied"
REJECTED = "rejected"

DEFAULT_GAS_LIMIT = 30_000_000
NONCE_WINDOW = 64


@dataclass(frozen=True)
class Transaction:
    """A signed payload.

    ``body`` depends on ``kind``: ``(recipient, amount)`` for a transfer,
    ``()`` for a noop, ``(epoch, prefs)`` for a ballot where ``prefs`` is a
    tuple of candidate identifiers.
    """

    issuer: str
    nonce: int
    kind: str
    body: tuple = ()
    signature: bytes = b""

    def __post_init__(self):
        if self.kind not in TX_KINDS:
            raise ValueError(f"unknown transaction kind {self.kind!r}")
        if self.nonce < 0:
            raise ValueError("nonce must be non-negative")

    @property
    def key(self) -> tuple:
        return (self.issuer, self.nonce)

    @cached_property
    def signing_bytes(self) -> bytes:
        return encode("tx", self.issuer, self.nonce, self.kind, self.body)

    @cached_property
    def digest(self) -> bytes:
        return digest(self.signing_bytes, self.signature)

    def signed(self, sign: Callable[[bytes], bytes]) -> "Transaction":
        return Transaction(self.issuer, self.nonce, self.kind, self.body, sign(self.signing_bytes))

    def to_dict(self) -> dict:
        if self.kind == BALLOT:
            body = [self.body[0], list(self.body[1])]
        else:
            body = list(self.body)
        return {
            "issuer": self.issuer,
            "nonce": self.nonce,
            "kind": self.kind,
            "body": body,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transaction":
        kind = d["kind"]
        body = d.get("body", [])
        if kind == BALLOT:
            body = (int(body[0]), tuple(body[1]))
        elif kind == TRANSFER:
            body = (str(body[0]), int(body[1]))
        else:
            body = tuple(body)
        return cls(d["issuer"], int(d["nonce"]), kind, body, bytes.fromhex(d.get("signature", "")))


def make_tx(keyring: KeyRing, issuer: str, nonce: int, kind: str, body: tuple = ()) -> Transaction:
    return Transaction(issuer, nonce, kind, tuple(body)).signed(keyring.signer(issuer))


@dataclass(frozen=True)
class Receipt:
    tx_digest: bytes
    status: str
    account_ref: bytes  # digest of the issuer's (balance, next_nonce) after the tx

    def encoded(self) -> tuple:
        return (self.tx_digest, self.status, self.account_ref)

    def to_dict(self) -> dict:
        return {"tx": self.tx_digest.hex(), "status": self.status, "account": self.account_ref.hex()}

    @classmethod
    def from_dict(cls, d: dict) -> "Receipt":
        return cls(bytes.fromhex(d["tx"]), d["status"], bytes.fromhex(d["account"]))


@dataclass(frozen=True)
class Block:
    height: int
    parent_digest: bytes
    state_digest: bytes
    tx_digest: bytes
    receipt_digest: bytes
    gas_used: int
    gas_limit: int
    nonce: int
    timestamp: int
    txs: tuple = ()
    receipts: tuple = ()
    epoch: int = 0
    instance: int = -1
    slot: int = -1

    @cached_property
    def header_bytes(self) -> bytes:
        return encode(
            self.parent_digest,
            self.state_digest,
            self.tx_digest,
            self.receipt_digest,
            self.gas_used,
            self.gas_limit,
            self.nonce,
            self.timestamp,
        )

    @cached_property
    def digest(self) -> bytes:
        return digest(self.header_bytes)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "digest": self.digest.hex(),
            "parent": self.parent_digest.hex(),
            "state": self.state_digest.hex(),
            "tx_root": self.tx_digest.hex(),
            "receipt_root": self.receipt_digest.hex(),
            "gas_used": self.gas_used,
            "gas_limit": self.gas_limit,
            "nonce": self.nonce,
            "timestamp": self.timestamp,
            "epoch": self.epoch,
            "instance": self.instance,
            "slot": self.slot,
            "txs": [tx.to_dict() for tx in self.txs],
            "receipts": [r.to_dict() for r in self.receipts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            height=int(d["height"]),
            parent_digest=bytes.fromhex(d["parent"]),
            state_digest=bytes.fromhex(d["state"]),
            tx_digest=bytes.fromhex(d["tx_root"]),
            receipt_digest=bytes.fromhex(d["receipt_root"]),
            gas_used=int(d["gas_used"]),
            gas_limit=int(d["gas_limit"]),
            nonce=int(d["nonce"]),
            timestamp=int(d["timestamp"]),
            txs=tuple(Transaction.from_dict(t) for t in d.get("txs", [])),
            receipts=tuple(Receipt.from_dict(r) for r in d.get("receipts", [])),
            epoch=int(d.get("epoch", 0)),
            instance=int(d.get("instance", -1)),
            slot=int(d.get("slot", -1)),
        )


def state_digest(accounts: dict) -> bytes:
    return digest("state", [(ident, bal, nonce) for ident, (bal, nonce) in sorted(accounts.items())])


def txs_digest(txs: Iterable[Transaction]) -> bytes:
    return digest("txs", [tx.digest for tx in txs])


def receipts_digest(receipts: Iterable[Receipt]) -> bytes:
    return digest("receipts", [r.encoded() for r in receipts])


def genesis_block(balances: dict, committee: Iterable[str] = (), gas_limit: int = DEFAULT_GAS_LIMIT) -> Block:
    accounts = {ident: (int(bal), 0) for ident, bal in balances.items()}
    return Block(
        height=0,
        parent_digest=ZERO_DIGEST,
        state_digest=digest("genesis", state_digest(accounts), list(committee)),
        tx_digest=txs_digest(()),
        receipt_digest=receipts_digest(()),
        gas_used=0,
        gas_limit=gas_limit,
        nonce=0,
        timestamp=0,
    )


def account_ref(ident: str, entry: tuple) -> bytes:
    return digest("account", ident, entry[0], entry[1])


def validate_for_exec(tx: Transaction, accounts: dict, keyring: KeyRing) -> bool:
    """Exec-time check: signature, exact next nonce, and funds for transfers."""
    entry = accounts.get(tx.issuer)
    if entry is None or tx.issuer not in keyring:
        return False
    if tx.nonce != entry[1]:
        return False
    if not keyring.verify(tx.issuer, tx.signing_bytes, tx.signature):
        return False
    if tx.kind == TRANSFER:
        if len(tx.body) != 2:
            return False
        recipient, amount = tx.body
        if not isinstance(amount, int) or amount < 0 or amount > entry[0]:
            return False
        if not isinstance(recipient, str) or recipient not in accounts:
            return False
    elif tx.kind == BALLOT:
        if len(tx.body) != 2 or not isinstance(tx.body[1], tuple):
            return False
    return True


BallotHook = Callable[[Transaction], None]


def run_tx(tx: Transaction, accounts: dict, ballot_hook: Optional[BallotHook] = None) -> tuple:
    """Apply an already validated transaction; returns ``(accounts', receipt)``.

    ``accounts`` is not modified. Ballot transactions bump the nonce and are
    handed to ``ballot_hook``.
    """
    after = dict(accounts)
    bal, nonce = after[tx.issuer]
    if tx.kind == TRANSFER:
        recipient, amount = tx.body
        bal -= amount
        after[tx.issuer] = (bal, nonce + 1)
        rbal, rnonce = after[recipient]
        after[recipient] = (rbal + amount, rnonce)
    else:
        after[tx.issuer] = (bal, nonce + 1)
    if tx.kind == BALLOT and ballot_hook is not None:
        ballot_hook(tx)
    return after, Receipt(tx.digest, APPLIED, account_ref(tx.issuer, after[tx.issuer]))


class Ledger:
    """One node's replicated state: accounts, chain and mempool."""

    def __init__(
        self,
        balances: dict,
        keyring: KeyRing,
        committee: Iterable[str] = (),
        gas_limit: int = DEFAULT_GAS_LIMIT,
        nonce_window: int = NONCE_WINDOW,
    ):
        self.keyring = keyring
        self.gas_limit = gas_limit
        self.nonce_window = nonce_window
        self.accounts: dict = {ident: (int(bal), 0) for ident, bal in balances.items()}
        self.chain: list = [genesis_block(balances, committee, gas_limit)]
        self.mempool: dict = {}  # (issuer, nonce) -> tx, in admission order
        self.committed: dict = {}  # (issuer, nonce) -> height

    @property
    def height(self) -> int:
        """Height of the last block; the genesis block has height 0."""
        return len(self.chain) - 1

    @property
    def head(self) -> Block:
        return self.chain[-1]

    def total_balance(self) -> int:
        return sum(bal for bal, _ in self.accounts.values())

    def receive_tx(self, tx: Transaction) -> bool:
        """Mempool admission: signature, nonce window and deduplication."""
        entry = self.accounts.get(tx.issuer)
        if entry is None:
            return False
        if tx.key in self.mempool or tx.nonce < entry[1]:
            return False
        if tx.nonce > entry[1] + self.nonce_window:
            return False
        if tx.issuer not in self.keyring or not self.keyring.verify(tx.issuer, tx.signing_bytes, tx.signature):
            return False
        self.mempool[tx.key] = tx
        return True

    def proposal_ready(self, threshold: int, timer_expired: bool) -> bool:
        return len(self.mempool) >= threshold or timer_expired

    def drain(self, cap: int) -> list:
        """Remove up to ``cap`` transactions in admission order.

        Network reordering can admit nonce ``i + 1`` before ``i``; within the
        positions held by one issuer the transactions are re-sorted by nonce,
        so a batch never carries an issuer's sequence out of order.
        """
        taken = []
        for key in list(self.mempool):
            if len(taken) >= cap:
                break
            taken.append(self.mempool.pop(key))
        by_issuer: dict = {}
        for tx in taken:
            by_issuer.setdefault(tx.issuer, []).append(tx)
        for txs in by_issuer.values():
            txs.sort(key=lambda tx: tx.nonce)
            txs.reverse()
        return [by_issuer[tx.issuer].pop() for tx in taken]

    def build_proposal(
        self,
        proposer: str,
        instance: int,
        timestamp: int,
        cap: int = 1000,
        epoch: int = 0,
        noop: Optional[Callable[[], Transaction]] = None,
    ) -> Proposal:
        """Drain up to ``cap`` transactions in admission order into a proposal.

        With an empty mempool and a ``noop`` factory, the proposal carries a
        single self-issued no-op instead.
        """
        txs = self.drain(cap)
        if not txs and noop is not None:
            txs = [noop()]
        return Proposal(proposer, instance, tuple(txs), timestamp, epoch)

    def requeue(self, txs: Iterable[Transaction]) -> None:
        """Put transactions back at the front of the mempool if still pending."""
        fresh = {}
        for tx in txs:
            entry = self.accounts.get(tx.issuer)
            if entry is not None and tx.nonce >= entry[1] and tx.key not in fresh:
                fresh[tx.key] = tx
        for key, tx in self.mempool.items():
            fresh.setdefault(key, tx)
        self.mempool = fresh

    def next_nonce(self, ident: str) -> int:
        return self.accounts[ident][1]

    def exec_superblock(self, sb: Superblock, ballot_hook: Optional[BallotHook] = None) -> list:
        """Append one block per proposal in slot order; returns the new blocks."""
        blocks = []
        for slot, prop in sb.entries:
            accounts = self.accounts
            valid, receipts = [], []
            for tx in prop.txs:
                if not validate_for_exec(tx, accounts, self.keyring):
                    continue
                accounts, receipt = run_tx(tx, accounts, ballot_hook)
                valid.append(tx)
                receipts.append(receipt)
            self.accounts = accounts
            parent = self.head
            block = Block(
                height=parent.height + 1,
                parent_digest=parent.digest,
                state_digest=state_digest(accounts),
                tx_digest=txs_digest(valid),
                receipt_digest=receipts_digest(receipts),
                gas_used=0,
                gas_limit=self.gas_limit,
                nonce=0,
                timestamp=max(prop.timestamp, parent.timestamp),
                txs=tuple(valid),
                receipts=tuple(receipts),
                epoch=sb.epoch,
                instance=sb.instance,
                slot=slot,
            )
            self.chain.append(block)
            for tx in valid:
                self.committed[tx.key] = block.height
                self.mempool.pop(tx.key, None)
            blocks.append(block)
        self._purge_stale()
        return blocks

    def _purge_stale(self) -> None:
        stale = [key for key, tx in self.mempool.items() if tx.nonce < self.accounts[tx.issuer][1]]
        for key in stale:
            del self.mempool[key]
