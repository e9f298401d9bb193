struct Adder {
    int add(int a, int b) const { return a + b }
};
