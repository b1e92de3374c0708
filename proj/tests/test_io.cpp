#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "cura/errors.hpp"
#include "cura/io.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace cura;

namespace {

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320), independent of zlib.
std::uint32_t crc32_reference(const std::vector<std::uint8_t>& bytes) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (auto b : bytes) {
        crc ^= b;
        for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

struct Assembler {
    std::vector<std::uint8_t> bytes;
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void blob(std::vector<std::uint32_t> shape, std::vector<double> values) {
        u8(static_cast<std::uint8_t>(shape.size()));
        for (auto e : shape) u32(e);
        for (double v : values) f64(v);
    }
};

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("hand-assembled minimal model loads and evaluates to the output bias") {
    Assembler a;
    for (char c : std::string("CURA")) a.u8(static_cast<std::uint8_t>(c));
    a.u16(1);
    a.u32(1);  // in_channels
    a.u32(1);  // seq_len
    a.u32(1);  // model_dim
    a.u32(1);  // out_dim
    a.u8(0);   // multiplicative
    a.u8(0);   // sigmoid
    a.u8(0);   // relu
    a.u8(0);   // conv1d
    a.u8(0);   // depthwise
    a.u32(3);  // kernel size
    a.u8(0);   // mean pooling
    a.u64(0);  // seed
    a.u32(10);
    a.blob({1, 1}, {0});   // W_g
    a.blob({1}, {0});      // b_g
    a.blob({1, 1}, {0});   // W_r
    a.blob({1}, {0});      // b_r
    a.blob({1, 1}, {0});   // W_n
    a.blob({1}, {0});      // b_n
    a.blob({3, 1}, {0, 0, 0});
    a.blob({1}, {0});
    a.blob({1, 1}, {0});   // W_o
    a.blob({1}, {0.75});   // b_o
    a.u32(crc32_reference(a.bytes));

    CHECK(crc32_of(a.bytes.data(), a.bytes.size() - 4) == crc32_reference({a.bytes.begin(), a.bytes.end() - 4}));
    const SavedModel m = decode_model(a.bytes);
    CHECK(m.config.model_dim == 1);
    CHECK(count_params(m.config) == 12);
    CHECK(cura_forward(Tensor::matrix({{4.2}}), m.params, m.config) == Tensor::vector({0.75}));
    CHECK(encode_model(m.config, m.params) == a.bytes);
}

TEST_CASE("save and load round trip bit for bit") {
    const auto dir = testing::scratch_dir("model_roundtrip");
    std::mt19937_64 rng(5);
    for (const auto& c : testing::variant_sweep(12, 7)) {
        const auto p = init_params(c, rng());
        save_model(dir / "m.cura", c, p);
        const SavedModel back = load_model(dir / "m.cura");
        CHECK(back.config == c);
        for (auto b : p.present()) CHECK(bitwise_equal(back.params[b], p[b]));
        const Tensor x = testing::random_tensor({c.seq_len, c.in_channels}, rng);
        CHECK(bitwise_equal(cura_forward(x, back.params, back.config), cura_forward(x, p, c)));
    }
}

TEST_CASE("damaged model files are rejected with the right error") {
    CuraConfig c;
    c.seq_len = 4;
    const auto bytes = encode_model(c, init_params(c, 1));
    auto kind_of = [](const std::vector<std::uint8_t>& b) {
        try {
            decode_model(b);
        } catch (const LoadError& e) {
            return e.kind();
        }
        FAIL("corruption went unnoticed");
        return LoadError::Kind::io;
    };

    CHECK(kind_of({bytes.begin(), bytes.end() - 1}) == LoadError::Kind::checksum_mismatch);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(kind_of(magic) == LoadError::Kind::bad_magic);
    auto version = bytes;
    version[4] = 2;
    CHECK(kind_of(version) == LoadError::Kind::unsupported_version);
    auto body = bytes;
    body[40] ^= 0x10;
    CHECK(kind_of(body) == LoadError::Kind::checksum_mismatch);
    CHECK(kind_of({}) == LoadError::Kind::bad_magic);

    for (std::size_t i = 0; i < bytes.size(); ++i) {
        auto damaged = bytes;
        damaged[i] ^= 0xA5;
        CHECK_THROWS_AS(decode_model(damaged), LoadError);
    }
    CHECK_THROWS_AS(load_model("/nonexistent/model.cura"), LoadError);
}

TEST_CASE("run configuration parsing") {
    const RunConfig rc = parse_run_config(
        "# comment\n"
        "task = classification\n"
        "\n"
        "window = 32   # trailing comment\n"
        "features = a, b ,c\n"
        "target = label\n"
        "model_dim = 12\n"
        "gating = convolutional\n"
        "gate_activation = hard_sigmoid\n"
        "filter_mode = full\n"
        "learning_rate = 0.005\n"
        "amsgrad = false\n"
        "seed = 9\n"
        "num_classes = 4\n");
    CHECK(rc.task == Task::classification);
    CHECK(rc.window == 32);
    CHECK(rc.features == std::vector<std::string>{"a", "b", "c"});
    CHECK(rc.model.gating == GatingKind::convolutional);
    CHECK(rc.model.gate_activation == Activation::hard_sigmoid);
    CHECK(rc.model.filter_mode == ConvMode::full);
    CHECK(rc.hyper.learning_rate == 0.005);
    CHECK_FALSE(rc.hyper.amsgrad);
    CHECK(rc.hyper.seed == 9);
    CHECK(rc.model.seed == 9);
    const CuraConfig m = rc.resolved_model();
    CHECK(m.in_channels == 3);
    CHECK(m.seq_len == 32);
    CHECK(m.out_dim == 4);

    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_run_config(text);
        } catch (const ConfigError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("window = 3\nbogus = 1\n") == 2);
    CHECK(line_of("window = 3\n\nwindow = -1\n") == 3);
    CHECK(line_of("gating = sideways\n") == 1);
    CHECK(line_of("just words\n") == 1);
}

TEST_CASE("sidecar round trip") {
    const auto dir = testing::scratch_dir("sidecar");
    SynthSpec spec;
    spec.rows = 80;
    spec.channels = 2;
    spec.noise_std = 0.3;
    const Series s = gen_synth(spec);
    WindowSpec w;
    w.window = 5;
    w.horizon = 2;
    w.features = {0, 1};
    w.target = 1;
    const auto ds = make_windows(s, w);
    const DataSidecar sc = DataSidecar::from_dataset(ds, s);
    save_sidecar(sidecar_path(dir / "m.cura"), sc);
    CHECK(sidecar_path(dir / "m.cura").filename() == "m.cura.norm");
    CHECK(load_sidecar(sidecar_path(dir / "m.cura")) == sc);
}
