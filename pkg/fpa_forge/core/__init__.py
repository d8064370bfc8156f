"""Byte-level building blocks: MQTT codec, TCP encapsulation, pcap I/O."""
