# %% [markdown]
# # Reading captures and cutting header slices
#
# Generate a labelled capture, read it back, strip the known lower layers
# and look at the first bytes of the unknown protocol.

# %%
import tempfile
from pathlib import Path

from protoclust.capture import (Layer, attach_labels, detect_text_protocol, extract_header, load_pcap,
                                read_labels, strip_dataset, stratified_sample)
from protoclust.synth import builtin_specs, write_dataset

work = Path(tempfile.mkdtemp())
spec = builtin_specs()["sctp-chunks"]
write_dataset(spec, work / "sctp.pcap", work / "sctp.labels.csv", seed=0)

packets = attach_labels(load_pcap(work / "sctp.pcap"), read_labels(work / "sctp.labels.csv"))
print(len(packets), "packets")

# %% [markdown]
# More than 200 packets, so draw a stratified sample. Class shares are kept
# by largest-remainder apportionment.

# %%
d = stratified_sample(packets, 200, seed=0, osi_target=Layer.TRANSPORT, name="sctp")
from collections import Counter
print(Counter(d.labels))

# %%
payloads, kept = strip_dataset(d)
for p in payloads[:3]:
    print(extract_header(p, 12, Layer.TRANSPORT).bytes.hex())

print("textual?", detect_text_protocol(d))
