// One-pixel non-targeted attack against a random linear-softmax classifier.
//
//   ./one_pixel_demo [seed]

#include <cstdlib>
#include <iostream>

#include "pixelstorm/pixelstorm.hpp"

int main(int argc, char** argv) {
    using namespace pixelstorm;
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 3;

    const OracleInfo info{16, 16, 3, 10, {}};
    const auto model = LinearSoftmaxOracle::random(info, seed, 0.3);
    CountingOracle oracle(model);

    Rng rng(seed);
    std::vector<std::uint8_t> pixels(info.input_size());
    for (auto& p : pixels)
        p = static_cast<std::uint8_t>(rng.below(256));
    ImageTensor image(info.width, info.height, info.channels, std::move(pixels));
    const auto clean = model.predict(image);
    LabeledImage labeled{image, clean.argmax(), "demo"};

    AttackSpec spec = AttackSpec::from_preset(Preset::kaggle_cifar10, 1, seed);
    spec.de.population_size = 100;
    spec.de.max_generations = 30;
    const auto out = run_nontargeted_attack(oracle, labeled, spec);

    std::cout << "clean class " << labeled.true_class << " (p=" << clean[labeled.true_class] << ")\n"
              << "adversarial class " << out.predicted_class << " (p=" << out.final_probs[out.predicted_class]
              << ", true-class p=" << out.final_probs[labeled.true_class] << ")\n"
              << "success " << std::boolalpha << out.success << " after " << out.generations_run
              << " generations, " << out.evaluations_used << " evaluations (oracle counted "
              << oracle.count() << ")\n";
    for (const auto& p : out.perturbation) {
        std::cout << "pixel (" << p.x << "," << p.y << ") -> (";
        for (std::size_t c = 0; c < p.color.size(); ++c)
            std::cout << (c ? "," : "") << int(p.color[c]);
        std::cout << ")\n";
    }
    return 0;
}
