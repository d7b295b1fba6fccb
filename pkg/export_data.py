"""Export bench tables to CSV, Excel (.xlsx) and PDF (.pdf)."""

import os
from typing import List, Optional, Sequence

import config
from bench import BenchRow, write_bench_csv
from date_utils import DateUtils
from error_logger import log_debug, log_error, log_export_error, log_export_success, log_library_check
from settings_manager import get_settings_manager

HEADERS = ["Config", "n", "Duration mean [s]", "Duration SEM [s]", "Score mean", "Score SEM",
           "Per object [s]", "Fastest"]


class BenchExporter:
    """Writes one bench run in every requested format to the export location."""

    def __init__(self, rows: Sequence[BenchRow], title: str = "bench", export_location: Optional[str] = None):
        """
        Args:
            rows: Bench rows, one per config
            title: Short name used in file names and headings
            export_location: Target folder; defaults to [Export] default_save_location
        """
        self.rows = list(rows)
        self.title = title
        self.export_location = export_location or self._load_export_location()
        self.written: List[str] = []

    def _load_export_location(self) -> str:
        return get_settings_manager().get_export_location()

    def _path(self, format_type, filename=None):
        if not filename:
            filename = config.Files.get_export_filename(self.title, format_type)
        return os.path.join(self.export_location, filename)

    def _sem_cell(self, value):
        return config.Bench.SEM_ABSENT if value is None else value

    def export_to_csv(self, filename: Optional[str] = None) -> bool:
        save_path = self._path("csv", filename)
        try:
            write_bench_csv(self.rows, save_path)
        except OSError as e:
            log_export_error("CSV", e, "write")
            return False
        log_export_success("CSV", save_path, len(self.rows))
        self.written.append(save_path)
        return True

    def export_to_excel(self, filename: Optional[str] = None) -> bool:
        """
        Export the bench table to Excel (.xlsx) format.

        Args:
            filename: Optional custom filename, auto-generates if None

        Returns:
            True if successful, False otherwise
        """
        try:
            import xlsxwriter
            log_library_check("xlsxwriter", True)
        except ImportError as e:
            log_library_check("xlsxwriter", False)
            log_export_error("Excel", e, "library_import")
            return False

        save_path = self._path("excel", filename)
        try:
            workbook = xlsxwriter.Workbook(save_path)
            worksheet = workbook.add_worksheet('Bench')

            header_format = workbook.add_format({
                'bold': True,
                'font_color': 'white',
                'bg_color': '#0078D4',
                'align': 'center',
                'valign': 'vcenter',
                'border': 1
            })
            cell_format = workbook.add_format({'align': 'left', 'valign': 'vcenter', 'border': 1})
            number_format = workbook.add_format({
                'align': 'right',
                'valign': 'vcenter',
                'border': 1,
                'num_format': '0.000'
            })
            fastest_format = workbook.add_format({
                'bold': True,
                'bg_color': '#E7E6E6',
                'align': 'center',
                'valign': 'vcenter',
                'border': 1
            })

            worksheet.set_column('A:A', 24)
            worksheet.set_column('B:B', 6)
            worksheet.set_column('C:G', 16)
            worksheet.set_column('H:H', 9)

            for col, header in enumerate(HEADERS):
                worksheet.write(0, col, header, header_format)

            for row_index, row in enumerate(self.rows, start=1):
                worksheet.write(row_index, 0, row.config, cell_format)
                worksheet.write_number(row_index, 1, row.n, number_format)
                values = [row.duration_mean, self._sem_cell(row.duration_sem), row.score_mean,
                          self._sem_cell(row.score_sem), self._sem_cell(row.per_object)]
                for offset, value in enumerate(values):
                    if isinstance(value, str):
                        worksheet.write_string(row_index, 2 + offset, value, cell_format)
                    else:
                        worksheet.write_number(row_index, 2 + offset, value, number_format)
                worksheet.write(row_index, 7, "yes" if row.fastest else "", fastest_format if row.fastest else cell_format)

            summary_row = len(self.rows) + 2
            summary_header_format = workbook.add_format({'bold': True, 'font_size': 12})
            worksheet.write(summary_row, 0, 'Summary:', summary_header_format)
            worksheet.write(summary_row + 1, 0, f'Configs: {len(self.rows)}')
            worksheet.write(summary_row + 2, 0, f'Runs: {sum(r.n for r in self.rows)}')
            fastest = next((r for r in self.rows if r.fastest), None)
            if fastest is not None:
                worksheet.write(summary_row + 3, 0, f'Fastest: {fastest.config}')

            workbook.close()
        except Exception as e:
            log_export_error("Excel", e, "write")
            return False

        log_export_success("Excel", save_path, len(self.rows))
        self.written.append(save_path)
        return True

    def export_to_pdf(self, filename: Optional[str] = None) -> bool:
        """
        Export the bench table to PDF format.

        Args:
            filename: Optional custom filename, auto-generates if None

        Returns:
            True if successful, False otherwise
        """
        try:
            from fpdf import FPDF
            log_library_check("fpdf", True)
        except ImportError as e:
            log_library_check("fpdf", False)
            log_export_error("PDF", e, "library_import")
            return False

        save_path = self._path("pdf", filename)
        try:
            pdf = FPDF(orientation='L')
            pdf.add_page()

            pdf.set_font('Helvetica', 'B', 18)
            pdf.set_text_color(0, 120, 212)  # #0078D4
            pdf.cell(0, 10, f'{config.App.NAME} - Bench Report', 0, 1, 'C')
            pdf.cell(0, 8, self.title, 0, 1, 'C')

            pdf.set_font('Helvetica', 'I', 9)
            pdf.set_text_color(128, 128, 128)
            pdf.cell(0, 6, f"Generated: {DateUtils.now_iso()}", 0, 1, 'C')
            pdf.ln(5)

            pdf.set_font('Helvetica', 'B', 10)
            pdf.set_fill_color(0, 120, 212)
            pdf.set_text_color(255, 255, 255)
            col_widths = [60, 15, 32, 32, 28, 28, 32, 20]
            for width, header in zip(col_widths, HEADERS):
                pdf.cell(width, 9, header, 1, 0, 'C', 1)
            pdf.ln()

            pdf.set_font('Helvetica', '', 9)
            pdf.set_text_color(0, 0, 0)
            fill = False
            for row in self.rows:
                if fill:
                    pdf.set_fill_color(245, 245, 245)
                else:
                    pdf.set_fill_color(255, 255, 255)
                name = row.config if len(row.config) <= 32 else row.config[:29] + '...'
                cells = [name] + row.to_record()[1:7] + ['yes' if row.fastest else '']
                for k, (width, text) in enumerate(zip(col_widths, cells)):
                    pdf.cell(width, 8, str(text), 1, 0, 'L' if k == 0 else 'R', 1)
                pdf.ln()
                fill = not fill

            pdf.ln(6)
            pdf.set_font('Helvetica', 'B', 11)
            pdf.cell(0, 8, 'Summary', 0, 1, 'L')
            pdf.set_font('Helvetica', '', 10)
            pdf.cell(0, 6, f'Configs: {len(self.rows)}', 0, 1, 'L')
            pdf.cell(0, 6, f'Runs: {sum(r.n for r in self.rows)}', 0, 1, 'L')
            pdf.cell(0, 6, f'SEM shown as "{config.Bench.SEM_ABSENT}" when n < 2', 0, 1, 'L')

            pdf.output(save_path, 'F')
        except Exception as e:
            log_export_error("PDF", e, "write")
            return False

        log_export_success("PDF", save_path, len(self.rows))
        self.written.append(save_path)
        return True

    def export(self, formats: Sequence[str] = ()) -> List[str]:
        """CSV always, plus 'excel' and/or 'pdf'. Returns the paths written."""
        exporters = {"excel": self.export_to_excel, "pdf": self.export_to_pdf}
        try:
            os.makedirs(self.export_location, exist_ok=True)
        except OSError as e:
            log_error(f"Cannot create export folder {self.export_location}", e)
            return []
        self.export_to_csv()
        for format_type in formats:
            exporter = exporters.get(format_type)
            if exporter is None:
                log_debug(f"Ignoring unknown export format '{format_type}'")
                continue
            exporter()
        return list(self.written)


def export_bench(rows: Sequence[BenchRow], title="bench", formats: Optional[Sequence[str]] = None,
                 export_location: Optional[str] = None) -> List[str]:
    """Export with the formats from settings.ini ([Export] bench_formats) unless given."""
    if formats is None:
        formats = get_settings_manager().get_export_formats()
    return BenchExporter(rows, title, export_location).export(formats)
