fn main() {
    gridstate::cli::main();
}
