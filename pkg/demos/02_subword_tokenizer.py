"""
Byte-pair tokenizer from scratch
================================

Train merge rules on a toy corpus, inspect them, and confirm the lossless
encode/decode round trip that interval token counting relies on.
"""

from convalign.synthetic import SynthSpec, generate
from convalign.tokenizer import train_bpe

conversations, _ = generate(SynthSpec(n_conversations=6, seed=0))
texts = [s.text for c in conversations for s in c.sentences]

vocab = train_bpe(texts, target_vocab=300)
print(f"vocab size {vocab.vocab_size} "
      f"(alphabet {len(vocab.alphabet)}, merges {len(vocab.merges)})")
print("first merges:", vocab.merges[:8])

sample = texts[0]
seq = vocab.encode(sample)
print(f"\n{sample!r}")
print("tokens:", [vocab.id_to_token[i] for i in seq.ids])
print("round trip exact:", vocab.decode(seq) == sample)
print("token_count:", vocab.token_count(sample))

# Unknown characters degrade gracefully to <unk>:
weird = vocab.encode("Top1 λ dok2")
print("\nwith an unseen character:", [vocab.id_to_token[i] for i in weird.ids])
