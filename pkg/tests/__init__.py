"""
Test suite for the airdrop_sybil package.
"""
