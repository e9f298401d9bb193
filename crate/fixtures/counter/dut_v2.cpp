struct Counter {
    unsigned count = 0;
    void reset() { count = 0; }
    void tick() { count = (count + 2) & 0xF; }
    unsigned value() const { return count; }
};
