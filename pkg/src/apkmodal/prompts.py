"""Fixed annotation prompt templates.

These two strings are the annotation contract: downstream annotations are
only comparable if every run uses the identical instructions, so the
templates are frozen here and their digests are pinned in the test suite.
Any edit is a breaking change to the dataset format.
"""

BENIGN_PROMPT_TEMPLATE = (
    "Examine the provided text extracts from the APK file. In a single paragraph, "
    "identify and summarize the key features that indicate the APK is benignware. "
    "Focus on necessary permissions, strings related to app functionality, and the "
    "absence of malicious indicators. Provide a concise and informative summary, "
    "prioritizing the most important and relevant features."
)

MALWARE_PROMPT_TEMPLATE = (
    "Examine the provided text extracts from the APK file. In a single paragraph, "
    "identify and summarize the key features that indicate the APK is malware. "
    "Focus on dangerous permissions (e.g., 'SEND_SMS', 'READ_CONTACTS'), suspicious "
    "strings (URLs, IP addresses, C&C related terms), and indications of malicious "
    "behavior (data theft, device manipulation)."
)

# Evidence is appended below this delimiter; truncation may shorten the
# evidence but never touches the template above it.
EVIDENCE_DELIMITER = "\n\n=== Text extracts from the APK ===\n"
