#include "xfrl/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <vector>

#include "xfrl/error.hpp"

namespace xfrl::ckpt {

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {

enum Role : std::uint8_t {
    conv_w = 0,
    conv_b = 1,
    fc_w = 2,
    fc_b = 3,
    dec_w = 4,
    dec_b = 5,
};

struct Writer {
    std::vector<unsigned char> buf;

    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), c, c + n);
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { bytes(&v, 2); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }

    void record(std::uint32_t layer, Role role, const Tensor& t) {
        u32(layer);
        u8(role);
        u8(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape) u64(d);
        bytes(t.v.data(), t.v.size() * sizeof(double));
    }
};

struct Reader {
    const unsigned char* p;
    std::size_t len;
    std::size_t off = 0;
    std::string path;

    void need(std::size_t n) const {
        if (off + n > len) throw io_error("truncated checkpoint file: " + path);
    }
    void bytes(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, p + off, n);
        off += n;
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint16_t u16() { std::uint16_t v; bytes(&v, 2); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }

    void record_into(std::uint32_t want_layer, Role want_role, Tensor& t) {
        const std::uint32_t layer = u32();
        const std::uint8_t role = u8();
        if (layer != want_layer || role != want_role)
            throw io_error("checkpoint record order mismatch in " + path);
        const std::uint8_t nd = u8();
        if (nd != t.rank()) throw io_error("checkpoint record rank mismatch in " + path);
        for (std::size_t i = 0; i < nd; ++i) {
            if (u64() != t.shape[i])
                throw io_error("checkpoint record shape mismatch in " + path);
        }
        bytes(t.v.data(), t.v.size() * sizeof(double));
    }
};

}  // namespace

void save_checkpoint(const net::NetworkModel& m, const std::filesystem::path& path) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u8(static_cast<std::uint8_t>(m.arch));
    w.u8(static_cast<std::uint8_t>(m.head.kind));
    w.u32(static_cast<std::uint32_t>(m.head.num_classes));
    w.u32(static_cast<std::uint32_t>(m.in_ch));
    w.u32(static_cast<std::uint32_t>(m.in_h));
    w.u32(static_cast<std::uint32_t>(m.in_w));

    std::uint32_t records = static_cast<std::uint32_t>(2 * m.blocks.size() + 2 * m.decoder.size());
    if (m.head.kind == net::HeadKind::classification) records += 2;
    w.u32(records);

    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        w.record(static_cast<std::uint32_t>(l + 1), conv_w, m.blocks[l].w.value);
        w.record(static_cast<std::uint32_t>(l + 1), conv_b, m.blocks[l].b.value);
    }
    for (std::size_t j = 0; j < m.decoder.size(); ++j) {
        w.record(static_cast<std::uint32_t>(j + 1), dec_w, m.decoder[j].w.value);
        w.record(static_cast<std::uint32_t>(j + 1), dec_b, m.decoder[j].b.value);
    }
    if (m.head.kind == net::HeadKind::classification) {
        w.record(0, fc_w, m.fc_w.value);
        w.record(0, fc_b, m.fc_b.value);
    }
    w.u32(crc32(w.buf.data(), w.buf.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write checkpoint " + path.string());
    f.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!f) throw io_error("short write to checkpoint " + path.string());
}

net::NetworkModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());

    Reader r{buf.data(), buf.size(), 0, path.string()};
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("bad checkpoint magic in " + path.string() + " (not an XFRL checkpoint)");
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw io_error("unsupported checkpoint version " + std::to_string(version) + " in " +
                       path.string() + " (expected " + std::to_string(kVersion) + ")");

    const std::uint8_t arch_tag = r.u8();
    const std::uint8_t head_tag = r.u8();
    if (arch_tag > 2 || head_tag > 1)
        throw io_error("corrupt checkpoint header in " + path.string());
    const auto arch = static_cast<net::Arch>(arch_tag);
    net::HeadSpec head{static_cast<net::HeadKind>(head_tag), r.u32()};
    const std::uint32_t in_ch = r.u32();
    const std::uint32_t in_h = r.u32();
    const std::uint32_t in_w = r.u32();
    const std::uint32_t records = r.u32();

    net::NetworkModel m = net::build(arch, head, in_ch, in_h, in_w, 0);
    std::uint32_t expect = static_cast<std::uint32_t>(2 * m.blocks.size() + 2 * m.decoder.size());
    if (head.kind == net::HeadKind::classification) expect += 2;
    if (records != expect) throw io_error("checkpoint record count mismatch in " + path.string());

    // structural pass first so a short file reports truncation, then the CRC
    if (buf.size() < r.off + 4) throw io_error("truncated checkpoint file: " + path.string());
    r.len = buf.size() - 4;  // the trailer is not part of any record
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        r.record_into(static_cast<std::uint32_t>(l + 1), conv_w, m.blocks[l].w.value);
        r.record_into(static_cast<std::uint32_t>(l + 1), conv_b, m.blocks[l].b.value);
    }
    for (std::size_t j = 0; j < m.decoder.size(); ++j) {
        r.record_into(static_cast<std::uint32_t>(j + 1), dec_w, m.decoder[j].w.value);
        r.record_into(static_cast<std::uint32_t>(j + 1), dec_b, m.decoder[j].b.value);
    }
    if (head.kind == net::HeadKind::classification) {
        r.record_into(0, fc_w, m.fc_w.value);
        r.record_into(0, fc_b, m.fc_b.value);
    }
    if (r.off != r.len)
        throw io_error("checkpoint has trailing bytes: " + path.string());

    std::uint32_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
    if (stored != crc32(buf.data(), buf.size() - 4))
        throw io_error("checkpoint CRC mismatch in " + path.string() + " (file is corrupted)");
    return m;
}

}  // namespace xfrl::ckpt
