#!/usr/bin/env python3
"""Regenerates data/sample_intents.jsonl, a small synthetic intent task.

Ten intents, each with its own keyword vocabulary plus shared filler words.
Deterministic: same seed, same file.
"""
import json
import random

LABELS = {
    "balance inquiry": ["balance", "funds", "account", "remaining"],
    "card blocked": ["card", "blocked", "declined", "frozen"],
    "exchange rate": ["exchange", "rate", "currency", "conversion"],
    "lost phone": ["phone", "lost", "stolen", "device"],
    "payment failed": ["payment", "failed", "bounced", "unsuccessful"],
    "reset password": ["password", "reset", "login", "forgot"],
    "statement request": ["statement", "history", "transactions", "download"],
    "top up": ["top", "up", "reload", "add"],
    "transfer money": ["transfer", "send", "wire", "move"],
    "update address": ["address", "update", "moved", "change"],
}
FILLER = [
    "please", "hello", "i", "need", "help", "with", "my", "the", "a", "can",
    "you", "now", "today", "urgent", "question", "about", "something", "is",
    "wrong", "quickly", "thanks", "app", "bank", "service", "issue",
]


def main() -> None:
    rng = random.Random(7)
    rows = []
    per_label = 260
    for label, keywords in sorted(LABELS.items()):
        for _ in range(per_label):
            words = rng.sample(keywords, 2) + rng.sample(FILLER, 4)
            rng.shuffle(words)
            rows.append({"text": " ".join(words), "label": label})
    rng.shuffle(rows)
    with open("data/sample_intents.jsonl", "w") as out:
        for i, row in enumerate(rows):
            row_out = {"id": f"ex-{i:04d}", "text": row["text"], "label": row["label"]}
            out.write(json.dumps(row_out, sort_keys=True) + "\n")
    print(f"wrote {len(rows)} examples")


if __name__ == "__main__":
    main()
