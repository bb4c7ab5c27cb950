#include "dift/service/image_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "dift/core/errors.hpp"

namespace dift {
namespace {

cv::Mat decode_raw(const std::string& bytes, int flags, int max_side) {
    if (bytes.empty()) throw DecodeError("empty image payload");
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<char*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, flags);
    } catch (const cv::Exception& e) {
        throw DecodeError(std::string("image decode failed: ") + e.what());
    }
    if (img.empty()) throw DecodeError("payload is not a decodable PNG/JPEG image");
    if (max_side > 0 && (img.rows > max_side || img.cols > max_side)) {
        throw PayloadTooLargeError("image is " + std::to_string(img.cols) + "x" + std::to_string(img.rows) +
                                   ", limit is " + std::to_string(max_side) + " per side");
    }
    if (img.depth() == CV_16U) {
        cv::Mat eight;
        img.convertTo(eight, CV_8U, 1.0 / 257.0);
        img = eight;
    } else if (img.depth() != CV_8U) {
        throw DecodeError("unsupported image bit depth");
    }
    return img;
}

}  // namespace

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImageRef decode_image(const std::string& bytes, std::string id, int max_side) {
    const cv::Mat img = decode_raw(bytes, cv::IMREAD_COLOR, max_side);
    std::vector<float> px(static_cast<std::size_t>(img.rows) * img.cols * 3);
    for (int y = 0; y < img.rows; ++y) {
        const auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.cols; ++x) {
            const std::size_t o = (static_cast<std::size_t>(y) * img.cols + x) * 3;
            px[o + 0] = row[x][2] / 255.0f;
            px[o + 1] = row[x][1] / 255.0f;
            px[o + 2] = row[x][0] / 255.0f;
        }
    }
    return ImageRef(std::move(id), img.rows, img.cols, std::move(px));
}

ImageRef load_image(const std::filesystem::path& path, std::string id, int max_side) {
    return decode_image(read_file_bytes(path), std::move(id), max_side);
}

std::string encode_png(const ImageRef& image) {
    cv::Mat img(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                row[x][2 - c] = cv::saturate_cast<std::uint8_t>(image.at(y, x, c) * 255.0f);
            }
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", img, out)) throw Error("PNG encoding failed");
    return {out.begin(), out.end()};
}

std::string encode_rgba_png(const RgbaImage& image) {
    image.validate();
    cv::Mat img(image.height, image.width, CV_8UC4);
    for (int y = 0; y < image.height; ++y) {
        auto* row = img.ptr<cv::Vec4b>(y);
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) row[x][2 - c] = cv::saturate_cast<std::uint8_t>(image.at(y, x, c) * 255.0f);
            row[x][3] = cv::saturate_cast<std::uint8_t>(image.at(y, x, 3) * 255.0f);
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", img, out)) throw Error("PNG encoding failed");
    return {out.begin(), out.end()};
}

RgbaImage decode_rgba(const std::string& bytes, int max_side) {
    const cv::Mat img = decode_raw(bytes, cv::IMREAD_UNCHANGED, max_side);
    RgbaImage out{img.rows, img.cols, std::vector<float>(static_cast<std::size_t>(img.rows) * img.cols * 4)};
    const int ch = img.channels();
    for (int y = 0; y < img.rows; ++y) {
        const std::uint8_t* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            const std::uint8_t* p = row + static_cast<std::size_t>(x) * ch;
            float r = 0;
            float g = 0;
            float b = 0;
            float a = 1;
            if (ch == 1) {
                r = g = b = p[0] / 255.0f;
            } else if (ch == 2) {
                r = g = b = p[0] / 255.0f;
                a = p[1] / 255.0f;
            } else {
                b = p[0] / 255.0f;
                g = p[1] / 255.0f;
                r = p[2] / 255.0f;
                if (ch == 4) a = p[3] / 255.0f;
            }
            out.at(y, x, 0) = r;
            out.at(y, x, 1) = g;
            out.at(y, x, 2) = b;
            out.at(y, x, 3) = a;
        }
    }
    return out;
}

HardMask decode_binary_mask(const std::string& bytes, int max_side) {
    const cv::Mat img = decode_raw(bytes, cv::IMREAD_UNCHANGED, max_side);
    HardMask out(img.rows, img.cols);
    const int ch = img.channels();
    // A 4-channel mask is judged by its alpha; otherwise by any color channel.
    for (int y = 0; y < img.rows; ++y) {
        const std::uint8_t* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            const std::uint8_t* p = row + static_cast<std::size_t>(x) * ch;
            bool on = false;
            if (ch == 4) {
                on = p[3] != 0;
            } else {
                for (int c = 0; c < std::min(ch, 3); ++c) on = on || p[c] != 0;
            }
            out.at(y, x) = on ? 1 : 0;
        }
    }
    return out;
}

std::array<std::uint8_t, 3> voc_palette_color(int label) {
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
    int c = label;
    for (int j = 0; j < 8; ++j) {
        rgb[0] |= static_cast<std::uint8_t>(((c >> 0) & 1) << (7 - j));
        rgb[1] |= static_cast<std::uint8_t>(((c >> 1) & 1) << (7 - j));
        rgb[2] |= static_cast<std::uint8_t>(((c >> 2) & 1) << (7 - j));
        c >>= 3;
    }
    return rgb;
}

HardMask decode_label_mask(const std::string& bytes) {
    const cv::Mat img = decode_raw(bytes, cv::IMREAD_UNCHANGED, 0);
    HardMask out(img.rows, img.cols);
    const int ch = img.channels();
    if (ch == 1) {
        for (int y = 0; y < img.rows; ++y) {
            const std::uint8_t* row = img.ptr<std::uint8_t>(y);
            for (int x = 0; x < img.cols; ++x) out.at(y, x) = row[x];
        }
        return out;
    }
    std::map<std::uint32_t, int> inverse;
    for (int l = 255; l >= 0; --l) {
        const auto c = voc_palette_color(l);
        inverse[(static_cast<std::uint32_t>(c[0]) << 16) | (c[1] << 8) | c[2]] = l;
    }
    for (int y = 0; y < img.rows; ++y) {
        const std::uint8_t* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            const std::uint8_t* p = row + static_cast<std::size_t>(x) * ch;
            const std::uint32_t key = (static_cast<std::uint32_t>(p[2]) << 16) | (p[1] << 8) | p[0];
            const auto it = inverse.find(key);
            if (it == inverse.end()) throw DecodeError("mask color is not in the VOC palette");
            out.at(y, x) = it->second;
        }
    }
    return out;
}

HardMask load_label_mask(const std::filesystem::path& path) { return decode_label_mask(read_file_bytes(path)); }

}  // namespace dift
