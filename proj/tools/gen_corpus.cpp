// Writes the bundled synthetic corpora to disk as .ppm directories for use
// with the main CLI.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sslvit/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic corpus generator"};
    std::string out;
    std::string kind = "shapes";
    std::size_t count = 64;
    std::size_t size = 64;
    std::uint64_t seed = 1;
    bool labels = false;
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--kind", kind, "shapes | bw")->check(CLI::IsMember({"shapes", "bw"}));
    app.add_option("--count", count, "number of images");
    app.add_option("--size", size, "square image size in pixels");
    app.add_option("--seed", seed, "generator seed");
    app.add_flag("--labels", labels, "also write labels.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        std::vector<int> label_vec;
        std::vector<sslvit::Image> images =
            kind == "bw" ? sslvit::make_bw_corpus(count, size, &label_vec)
                         : sslvit::make_shape_corpus(count, size, seed, &label_vec);
        sslvit::write_corpus(out, images, labels ? &label_vec : nullptr);
        std::cout << "wrote " << images.size() << " images to " << out << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
