int main() { return 2; } // command-line entry point not wired yet
