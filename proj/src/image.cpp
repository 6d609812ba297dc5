#include "sgs/image.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sgs/errors.hpp"

namespace sgs {

Raster decode_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        throw DecodeError(path.string(), "no such file");

    cv::Mat mat;
    try {
        mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_IGNORE_ORIENTATION);
    } catch (const cv::Exception& e) {
        throw DecodeError(path.string(), e.what());
    }
    if (mat.empty() || mat.cols < 1 || mat.rows < 1)
        throw DecodeError(path.string(), "unrecognised or truncated image data");

    const int channels = mat.channels();
    if (channels != 1 && channels != 3 && channels != 4)
        throw DecodeError(path.string(), "unsupported channel count " + std::to_string(channels));

    // OpenCV decodes to BGR(A); store RGB(A).
    if (channels == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
    if (channels == 4) cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGBA);

    double scale = 1.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        case CV_32F: scale = 1.0; break;
        default: throw DecodeError(path.string(), "unsupported pixel depth");
    }
    cv::Mat f;
    mat.convertTo(f, CV_32FC(channels), scale);

    Raster r;
    r.width = f.cols;
    r.height = f.rows;
    r.channels = channels;
    r.source = path;
    r.data.resize(static_cast<std::size_t>(r.width) * r.height * channels);
    for (int y = 0; y < f.rows; ++y) {
        const float* row = f.ptr<float>(y);
        std::copy(row, row + static_cast<std::size_t>(f.cols) * channels,
                  r.data.begin() + static_cast<std::ptrdiff_t>(y) * f.cols * channels);
    }
    for (auto& v : r.data) v = std::clamp(v, 0.0f, 1.0f);
    return r;
}

ImageTensor preprocess_image(const Raster& raster) {
    if (raster.width < 1 || raster.height < 1 ||
        raster.data.size() != static_cast<std::size_t>(raster.width) * raster.height * raster.channels)
        throw InvalidInput("raster is empty or its buffer does not match its dimensions");

    cv::Mat src(raster.height, raster.width, CV_32FC(raster.channels),
                const_cast<float*>(raster.data.data()));
    cv::Mat rgb;
    switch (raster.channels) {
        case 1: cv::cvtColor(src, rgb, cv::COLOR_GRAY2RGB); break;
        case 3: rgb = src; break;
        case 4: cv::cvtColor(src, rgb, cv::COLOR_RGBA2RGB); break;
        default: throw InvalidInput("raster must have 1, 3 or 4 channels");
    }

    cv::Mat out;
    if (rgb.cols == ImageTensor::kSide && rgb.rows == ImageTensor::kSide)
        out = rgb;
    else
        cv::resize(rgb, out, cv::Size(ImageTensor::kSide, ImageTensor::kSide), 0, 0, cv::INTER_LINEAR);

    ImageTensor img;
    img.source = raster.source;
    img.rgb.resize(static_cast<std::size_t>(ImageTensor::kSide) * ImageTensor::kSide * 3);
    for (int y = 0; y < out.rows; ++y) {
        const float* row = out.ptr<float>(y);
        std::copy(row, row + ImageTensor::kSide * 3,
                  img.rgb.begin() + static_cast<std::ptrdiff_t>(y) * ImageTensor::kSide * 3);
    }
    return img;
}

void write_png(const ImageTensor& image, const std::filesystem::path& path) {
    cv::Mat f(image.height, image.width, CV_32FC3, const_cast<float*>(image.rgb.data()));
    cv::Mat bgr, u8;
    cv::cvtColor(f, bgr, cv::COLOR_RGB2BGR);
    bgr.convertTo(u8, CV_8UC3, 255.0);
    if (!cv::imwrite(path.string(), u8)) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace sgs
