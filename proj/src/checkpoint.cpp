#include "ldt/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace ldt {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'T', 'N'};
constexpr uint16_t kVersion = 1;
// Plausibility cap so fuzzed shape tables cannot trigger huge allocations.
constexpr int64_t kMaxTotalFloats = int64_t{1} << 24;

enum BlockKind : uint16_t {
    kConvKernel = 1,
    kConvBias = 2,
    kBnGamma = 3,
    kBnShift = 4,
    kBnRunningMean = 5,
    kBnRunningVar = 6,
    kBnConfig = 7,  // [epsilon, momentum]
    kAdamM = 8,
    kAdamV = 9,
    kAdamConfig = 10,  // [lr, beta1, beta2, eps, clip_norm, step_count]
};

struct RawBlock {
    uint16_t kind = 0;
    std::vector<uint32_t> extents;
    std::vector<float> data;

    int64_t count() const {
        int64_t n = 1;
        for (uint32_t e : extents) n *= e;
        return n;
    }
};

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    uint16_t u16() {
        need(2);
        const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
        pos_ += 2;
        return static_cast<uint16_t>(p[0] | (p[1] << 8));
    }
    uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
        pos_ += 4;
        return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    }
    float f32() { return std::bit_cast<float>(u32()); }

    size_t pos() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& bytes() const { return bytes_; }

private:
    void need(size_t n) {
        require(pos_ + n <= bytes_.size(), ErrorKind::Format,
                "checkpoint: truncated file (needed ", n, " bytes at offset ", pos_, ")");
    }
    std::string bytes_;
    size_t pos_ = 0;
};

uint32_t payload_crc(const std::string& payload) {
    return static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size())));
}

void write_container(const std::string& path, const std::vector<RawBlock>& blocks) {
    std::string head;
    head.append(kMagic, 4);
    put_u16(head, kVersion);
    put_u32(head, static_cast<uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        put_u16(head, b.kind);
        put_u16(head, static_cast<uint16_t>(b.extents.size()));
        for (uint32_t e : b.extents) put_u32(head, e);
    }
    std::string payload;
    for (const auto& b : blocks)
        for (float v : b.data) put_f32(payload, v);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), ErrorKind::Data, "checkpoint: cannot open '", tmp,
                "' for writing");
        f.write(head.data(), static_cast<std::streamsize>(head.size()));
        f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        std::string tail;
        put_u32(tail, payload_crc(payload));
        f.write(tail.data(), static_cast<std::streamsize>(tail.size()));
        require(f.good(), ErrorKind::Data, "checkpoint: write to '", tmp, "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, ErrorKind::Data, "checkpoint: rename to '", path,
            "' failed: ", ec.message());
}

std::vector<RawBlock> read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::Data, "checkpoint: cannot open '", path, "'");
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    Reader r(std::move(bytes));

    require(r.remaining() >= 4, ErrorKind::Format, "checkpoint: file too short");
    require(std::memcmp(r.bytes().data(), kMagic, 4) == 0, ErrorKind::Format,
            "checkpoint: bad magic bytes");
    (void)r.u32();  // consume magic
    const uint16_t version = r.u16();
    require(version == kVersion, ErrorKind::Format,
            "checkpoint: unsupported format version ", version, " (expected ",
            kVersion, ")");
    const uint32_t block_count = r.u32();
    require(block_count <= 1024, ErrorKind::Format,
            "checkpoint: implausible block count ", block_count);

    std::vector<RawBlock> blocks(block_count);
    int64_t total = 0;
    for (auto& b : blocks) {
        b.kind = r.u16();
        const uint16_t rank = r.u16();
        require(rank >= 1 && rank <= 4, ErrorKind::Format,
                "checkpoint: block rank ", rank, " out of range");
        b.extents.resize(rank);
        int64_t count = 1;
        for (auto& e : b.extents) {
            e = r.u32();
            require(e >= 1, ErrorKind::Format, "checkpoint: zero extent in shape table");
            count *= e;
            require(count <= kMaxTotalFloats, ErrorKind::Format,
                    "checkpoint: shape table describes an implausibly large payload");
        }
        total += count;
        require(total <= kMaxTotalFloats, ErrorKind::Format,
                "checkpoint: shape table describes an implausibly large payload");
    }

    const size_t payload_start = r.pos();
    for (auto& b : blocks) {
        b.data.resize(static_cast<size_t>(b.count()));
        for (auto& v : b.data) v = r.f32();
    }
    const size_t payload_end = r.pos();
    const uint32_t stored_crc = r.u32();
    require(r.remaining() == 0, ErrorKind::Format,
            "checkpoint: ", r.remaining(), " trailing bytes after CRC");
    const std::string payload =
        r.bytes().substr(payload_start, payload_end - payload_start);
    require(payload_crc(payload) == stored_crc, ErrorKind::Format,
            "checkpoint: payload CRC mismatch");
    return blocks;
}

std::vector<uint32_t> tensor_extents(const Tensor& t) {
    const Shape& s = t.shape();
    return {static_cast<uint32_t>(s.b), static_cast<uint32_t>(s.h),
            static_cast<uint32_t>(s.w), static_cast<uint32_t>(s.c)};
}

void append_conv(std::vector<RawBlock>& out, const ConvLayerParams& p) {
    out.push_back({kConvKernel, tensor_extents(p.kernel),
                   {p.kernel.values().begin(), p.kernel.values().end()}});
    out.push_back({kConvBias, {static_cast<uint32_t>(p.bias.size())}, p.bias});
}

void append_bn(std::vector<RawBlock>& out, const BatchNormParams& p) {
    const auto n = static_cast<uint32_t>(p.gamma.size());
    out.push_back({kBnGamma, {n}, p.gamma});
    out.push_back({kBnShift, {n}, p.beta_shift});
    out.push_back({kBnRunningMean, {n}, p.running_mean});
    out.push_back({kBnRunningVar, {n}, p.running_var});
    out.push_back({kBnConfig, {2}, {p.epsilon, p.momentum}});
}

class BlockCursor {
public:
    explicit BlockCursor(std::vector<RawBlock> blocks) : blocks_(std::move(blocks)) {}

    const RawBlock& take(uint16_t kind, const char* what) {
        require(idx_ < blocks_.size(), ErrorKind::Format,
                "checkpoint: missing block for ", what);
        const RawBlock& b = blocks_[idx_++];
        require(b.kind == kind, ErrorKind::Format, "checkpoint: expected ", what,
                " (kind ", kind, ") but found kind ", b.kind, " at block ", idx_ - 1);
        return b;
    }

    void finish() {
        require(idx_ == blocks_.size(), ErrorKind::Format, "checkpoint: ",
                blocks_.size() - idx_, " unexpected extra blocks");
    }

private:
    std::vector<RawBlock> blocks_;
    size_t idx_ = 0;
};

ConvLayerParams read_conv(BlockCursor& c, const char* what) {
    const RawBlock& k = c.take(kConvKernel, what);
    require(k.extents.size() == 4, ErrorKind::Format, "checkpoint: ", what,
            " kernel must be rank 4");
    ConvLayerParams p;
    p.kernel = Tensor(Shape{k.extents[0], k.extents[1], k.extents[2], k.extents[3]},
                      k.data);
    const RawBlock& b = c.take(kConvBias, what);
    p.bias = b.data;
    return p;
}

BatchNormParams read_bn(BlockCursor& c, const char* what) {
    BatchNormParams p;
    p.gamma = c.take(kBnGamma, what).data;
    p.beta_shift = c.take(kBnShift, what).data;
    p.running_mean = c.take(kBnRunningMean, what).data;
    p.running_var = c.take(kBnRunningVar, what).data;
    const RawBlock& cfg = c.take(kBnConfig, what);
    require(cfg.data.size() == 2, ErrorKind::Format, "checkpoint: ", what,
            " config block must hold [epsilon, momentum]");
    p.epsilon = cfg.data[0];
    p.momentum = cfg.data[1];
    return p;
}

}  // namespace

LdtNetParams zero_params() {
    using namespace arch;
    LdtNetParams p;
    p.conv1.kernel = Tensor(Shape{kLayer1Out, kSharedKernel, kSharedKernel, kInputChannels});
    p.conv1.bias.assign(kLayer1Out, 0.0f);
    p.bn1 = BatchNormParams::identity(kLayer1Out);
    p.conv2.kernel = Tensor(Shape{kLayer2Out, kSharedKernel, kSharedKernel, kLayer2In});
    p.conv2.bias.assign(kLayer2Out, 0.0f);
    p.bn2 = BatchNormParams::identity(kLayer2Out);
    p.head_dehaze.kernel = Tensor(Shape{kDehazeOut, 1, 1, kHeadIn});
    p.head_dehaze.bias.assign(kDehazeOut, 0.0f);
    p.head_trans.kernel = Tensor(Shape{kTransOut, 1, 1, kHeadIn});
    p.head_trans.bias.assign(kTransOut, 0.0f);
    return p;
}

void save_params(const LdtNetParams& params, const std::string& path) {
    params.validate();
    std::vector<RawBlock> blocks;
    append_conv(blocks, params.conv1);
    append_bn(blocks, params.bn1);
    append_conv(blocks, params.conv2);
    append_bn(blocks, params.bn2);
    append_conv(blocks, params.head_dehaze);
    append_conv(blocks, params.head_trans);
    write_container(path, blocks);
}

LdtNetParams load_params(const std::string& path) {
    BlockCursor c(read_container(path));
    LdtNetParams p;
    try {
        p.conv1 = read_conv(c, "conv1");
        p.bn1 = read_bn(c, "bn1");
        p.conv2 = read_conv(c, "conv2");
        p.bn2 = read_bn(c, "bn2");
        p.head_dehaze = read_conv(c, "head_dehaze");
        p.head_trans = read_conv(c, "head_trans");
        c.finish();
        p.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Format) throw;
        raise(ErrorKind::Format, "checkpoint: '", path,
              "' violates the fixed topology: ", e.what());
    }
    return p;
}

void save_adam_state(const AdamState& state, const std::string& path) {
    require(state.first_moment.size() == state.second_moment.size(),
            ErrorKind::Contract, "adam state: moment block counts differ");
    std::vector<RawBlock> blocks;
    for (size_t i = 0; i < state.first_moment.size(); ++i) {
        blocks.push_back({kAdamM,
                          {static_cast<uint32_t>(state.first_moment[i].size())},
                          state.first_moment[i]});
        blocks.push_back({kAdamV,
                          {static_cast<uint32_t>(state.second_moment[i].size())},
                          state.second_moment[i]});
    }
    // step_count rides as a float; exact up to 2^24 steps, far beyond any
    // training run this tool performs.
    blocks.push_back({kAdamConfig,
                      {6},
                      {static_cast<float>(state.config.lr),
                       static_cast<float>(state.config.beta1),
                       static_cast<float>(state.config.beta2),
                       static_cast<float>(state.config.eps),
                       static_cast<float>(state.config.clip_norm),
                       static_cast<float>(state.step_count)}});
    write_container(path, blocks);
}

AdamState load_adam_state(const std::string& path) {
    std::vector<RawBlock> raw = read_container(path);
    require(!raw.empty() && raw.back().kind == kAdamConfig &&
                raw.back().data.size() == 6,
            ErrorKind::Format, "adam checkpoint: missing config block");
    require(raw.size() % 2 == 1, ErrorKind::Format,
            "adam checkpoint: moment blocks must come in pairs");

    AdamState s;
    const auto& cfg = raw.back().data;
    s.config.lr = cfg[0];
    s.config.beta1 = cfg[1];
    s.config.beta2 = cfg[2];
    s.config.eps = cfg[3];
    s.config.clip_norm = cfg[4];
    s.step_count = static_cast<int64_t>(cfg[5]);

    LdtNetParams shape_check = zero_params();
    const auto expected = learnable_blocks(shape_check);
    require(raw.size() - 1 == expected.size() * 2, ErrorKind::Format,
            "adam checkpoint: expected ", expected.size(), " moment pairs, found ",
            (raw.size() - 1) / 2);
    for (size_t i = 0; i + 1 < raw.size(); i += 2) {
        require(raw[i].kind == kAdamM && raw[i + 1].kind == kAdamV,
                ErrorKind::Format, "adam checkpoint: block ", i,
                " is not an (m, v) pair");
        const auto& want = expected[i / 2];
        require(static_cast<int64_t>(raw[i].data.size()) == want.size &&
                    static_cast<int64_t>(raw[i + 1].data.size()) == want.size,
                ErrorKind::Format, "adam checkpoint: moments for block '",
                want.name, "' have the wrong size");
        for (float v : raw[i + 1].data)
            require(v >= 0.0f, ErrorKind::Format,
                    "adam checkpoint: negative second moment in block '", want.name,
                    "'");
        s.first_moment.push_back(raw[i].data);
        s.second_moment.push_back(raw[i + 1].data);
    }
    return s;
}

}  // namespace ldt
