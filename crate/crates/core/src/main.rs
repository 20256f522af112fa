fn main() {
    scver::cli::main()
}
